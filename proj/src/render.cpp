#include "evogrid/render.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include "evogrid/common.hpp"

namespace evogrid::render {

namespace {

constexpr std::array<std::array<std::uint8_t, 3>, 8> kFamilyPalette = {{
    {230, 60, 60},   // red
    {60, 120, 230},  // blue
    {235, 200, 40},  // yellow
    {170, 80, 220},  // purple
    {240, 140, 40},  // orange
    {80, 220, 220},  // cyan
    {240, 100, 200}, // pink
    {150, 230, 80},  // lime
}};

char tile_glyph(const world::Tile& t, double capacity) {
    if (t.food >= capacity * (1.0 - 1e-9)) return '#';
    if (t.food >= capacity / 2.0) return ':';
    if (t.food > 0.0) return ',';
    return '.';
}

} // namespace

std::string legend() {
    return "legend: '.' empty  ',' food < half  ':' food >= half  '#' source at "
           "capacity  digit = agent family (first allele mod 10)\n";
}

std::string text_frame(const world::World& w) {
    const auto& cfg = w.config();
    std::ostringstream os;
    os << "tick " << w.tick() << " population " << w.agents().size() << "\n";
    for (std::int32_t y = 0; y < cfg.height; ++y) {
        for (std::int32_t x = 0; x < cfg.width; ++x) {
            const world::Tile& t = w.tile_at(x, y);
            if (t.occupied()) {
                const world::AgentState* a = w.find(t.occupant);
                os << static_cast<char>('0' + (a->genome.alleles[0] % 10));
            } else {
                os << tile_glyph(t, cfg.food_capacity);
            }
        }
        os << "\n";
    }
    return os.str();
}

void write_ppm_frame(const world::World& w, const std::filesystem::path& path,
                     int cell_size) {
    const auto& cfg = w.config();
    const int pw = cfg.width * cell_size;
    const int ph = cfg.height * cell_size;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write frame: " + path.string());
    f << "P6\n" << pw << " " << ph << "\n255\n";
    std::string row(static_cast<std::size_t>(pw) * 3, '\0');
    for (std::int32_t y = 0; y < cfg.height; ++y) {
        for (std::int32_t x = 0; x < cfg.width; ++x) {
            const world::Tile& t = w.tile_at(x, y);
            std::uint8_t r = 30, g = 26, b = 22; // dirt
            if (t.occupied()) {
                const world::AgentState* a = w.find(t.occupant);
                const auto& c = kFamilyPalette[a->genome.alleles[0] % kFamilyPalette.size()];
                r = c[0];
                g = c[1];
                b = c[2];
            } else if (t.kind == world::TileKind::FoodSource) {
                const double fill = cfg.food_capacity > 0 ? t.food / cfg.food_capacity : 0;
                r = 20;
                g = static_cast<std::uint8_t>(60 + 160 * fill);
                b = 30;
            }
            for (int px = 0; px < cell_size; ++px) {
                const std::size_t base = (static_cast<std::size_t>(x) * cell_size + px) * 3;
                row[base + 0] = static_cast<char>(r);
                row[base + 1] = static_cast<char>(g);
                row[base + 2] = static_cast<char>(b);
            }
        }
        for (int py = 0; py < cell_size; ++py)
            f.write(row.data(), static_cast<std::streamsize>(row.size()));
    }
}

int render_episode(const io::EpisodeLog& log, const std::filesystem::path& out_dir,
                   Format format, int cell_size) {
    std::filesystem::create_directories(out_dir);
    world::World w(log.config);
    if (!log.assignment.empty()) w.remap_policy_slots(log.assignment);

    const auto frame_path = [&](int idx, const char* ext) {
        std::ostringstream padded;
        padded << "frame_";
        const std::string num = std::to_string(idx);
        for (std::size_t i = num.size(); i < 6; ++i) padded << '0';
        padded << num << ext;
        return out_dir / padded.str();
    };

    int frames = 0;
    const auto emit = [&]() {
        if (format == Format::Text) {
            std::ofstream f(frame_path(frames, ".txt"));
            if (!f) throw IoError("cannot write frame");
            f << text_frame(w);
        } else {
            write_ppm_frame(w, frame_path(frames, ".ppm"), cell_size);
        }
        ++frames;
    };

    emit();
    for (const auto& tick_actions : log.actions) {
        world::ActionMap actions;
        for (const auto& [id, idx] : tick_actions)
            actions.emplace(id, world::Action::from_index(idx));
        w.step(actions);
        emit();
    }

    std::ofstream lf(out_dir / "legend.txt");
    lf << legend();
    return frames;
}

} // namespace evogrid::render
