#include "evogrid/io.hpp"

#include <bit>
#include <fstream>

#include "evogrid/common.hpp"

namespace evogrid::io {

namespace {

constexpr std::uint32_t kWorldMagic = 0x57475645;   // "EVGW"
constexpr std::uint32_t kNetMagic = 0x4e475645;     // "EVGN"
constexpr std::uint32_t kEpisodeMagic = 0x45475645; // "EVGE"
constexpr std::uint32_t kVersion = 1;

} // namespace

void BinaryWriter::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void BinaryWriter::u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void BinaryWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void BinaryWriter::str(const std::string& s) {
    u64(s.size());
    buf_.insert(buf_.end(), s.begin(), s.end());
}

std::uint8_t BinaryReader::u8() {
    if (pos_ + 1 > data_.size()) throw IoError("binary read past end");
    return data_[pos_++];
}

std::uint32_t BinaryReader::u32() {
    if (pos_ + 4 > data_.size()) throw IoError("binary read past end");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_++]) << (8 * i);
    return v;
}

std::uint64_t BinaryReader::u64() {
    if (pos_ + 8 > data_.size()) throw IoError("binary read past end");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_++]) << (8 * i);
    return v;
}

double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

std::string BinaryReader::str() {
    const std::uint64_t n = u64();
    if (pos_ + n > data_.size()) throw IoError("binary read past end");
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path.string());
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw IoError("cannot open: " + path.string());
    const std::streamsize n = f.tellg();
    f.seekg(0);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(n));
    f.read(reinterpret_cast<char*>(bytes.data()), n);
    if (!f) throw IoError("read failed: " + path.string());
    return bytes;
}

void write_world_config(BinaryWriter& w, const world::WorldConfig& cfg) {
    w.i32(cfg.width);
    w.i32(cfg.height);
    w.f64(cfg.endowment);
    w.i32(cfg.initial_health);
    w.i32(cfg.fertility_start);
    w.i32(cfg.fertility_end);
    w.i32(cfg.longevity);
    w.f64(cfg.food_growth_rate);
    w.f64(cfg.food_capacity);
    w.i32(cfg.genome_length);
    w.u8(static_cast<std::uint8_t>(cfg.reproduction));
    w.i32(cfg.founder_count);
    w.u8(static_cast<std::uint8_t>(cfg.food_layout.kind));
    w.f64(cfg.food_layout.density);
    w.u64(cfg.seed);
    w.u8(cfg.mask_kinship ? 1 : 0);
    w.f64(cfg.count_soft_cap);
    w.u8(cfg.blocked_family.has_value() ? 1 : 0);
    w.u32(cfg.blocked_family.value_or(0));
}

world::WorldConfig read_world_config(BinaryReader& r) {
    world::WorldConfig cfg;
    cfg.width = r.i32();
    cfg.height = r.i32();
    cfg.endowment = r.f64();
    cfg.initial_health = r.i32();
    cfg.fertility_start = r.i32();
    cfg.fertility_end = r.i32();
    cfg.longevity = r.i32();
    cfg.food_growth_rate = r.f64();
    cfg.food_capacity = r.f64();
    cfg.genome_length = r.i32();
    cfg.reproduction = static_cast<world::Reproduction>(r.u8());
    cfg.founder_count = r.i32();
    cfg.food_layout.kind = static_cast<world::FoodLayout::Kind>(r.u8());
    cfg.food_layout.density = r.f64();
    cfg.seed = r.u64();
    cfg.mask_kinship = r.u8() != 0;
    cfg.count_soft_cap = r.f64();
    const bool has_blocked = r.u8() != 0;
    const std::uint32_t blocked = r.u32();
    if (has_blocked) cfg.blocked_family = blocked;
    return cfg;
}

std::vector<std::uint8_t> serialize_world(const world::World& w) {
    BinaryWriter out;
    out.u32(kWorldMagic);
    out.u32(kVersion);
    write_world_config(out, w.config());
    out.i64(w.tick());
    out.i64(w.next_agent_id());
    out.str(w.rng().save_state());
    for (const auto& t : w.grid()) {
        out.u8(static_cast<std::uint8_t>(t.kind));
        out.f64(t.food);
    }
    out.u64(w.agents().size());
    for (const auto& a : w.agents()) {
        out.i64(a.id);
        out.i32(a.x);
        out.i32(a.y);
        out.i32(a.health);
        out.i32(a.age);
        out.f64(a.food_stored);
        out.i32(a.policy_slot);
        out.u32(static_cast<std::uint32_t>(a.genome.size()));
        for (std::uint32_t allele : a.genome.alleles) out.u32(allele);
    }
    return out.bytes();
}

world::World deserialize_world(std::span<const std::uint8_t> bytes) {
    BinaryReader r(bytes);
    if (r.u32() != kWorldMagic) throw IoError("not a world snapshot");
    if (r.u32() != kVersion) throw IoError("unsupported world snapshot version");
    const world::WorldConfig cfg = read_world_config(r);
    const std::int64_t tick = r.i64();
    const std::int64_t next_id = r.i64();
    const std::string rng_state = r.str();
    std::vector<world::Tile> tiles(static_cast<std::size_t>(cfg.width) * cfg.height);
    for (auto& t : tiles) {
        t.kind = static_cast<world::TileKind>(r.u8());
        t.food = r.f64();
    }
    const std::uint64_t n = r.u64();
    std::vector<world::AgentState> agents(n);
    for (auto& a : agents) {
        a.id = r.i64();
        a.x = r.i32();
        a.y = r.i32();
        a.health = r.i32();
        a.age = r.i32();
        a.food_stored = r.f64();
        a.policy_slot = r.i32();
        const std::uint32_t len = r.u32();
        a.genome.alleles.resize(len);
        for (auto& allele : a.genome.alleles) allele = r.u32();
    }
    world::World w = world::World::custom(cfg, std::move(tiles), std::move(agents), tick);
    w.restore_counters(tick, next_id);
    w.mutable_rng().load_state(rng_state);
    return w;
}

void save_world(const world::World& w, const std::filesystem::path& path) {
    const auto bytes = serialize_world(w);
    write_file(path, bytes);
}

world::World load_world(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return deserialize_world(bytes);
}

std::vector<std::uint8_t> serialize_network(const neural::QNetwork& net) {
    BinaryWriter out;
    out.u32(kNetMagic);
    out.u32(kVersion);
    out.u8(static_cast<std::uint8_t>(net.spec().kind));
    const auto shape = net.spec().shape_list();
    out.u32(static_cast<std::uint32_t>(shape.size()));
    for (std::int32_t s : shape) out.i32(s);
    out.i32(net.spec().mlp_hidden[0]);
    out.i32(net.spec().mlp_hidden[1]);
    out.i32(net.spec().mlp_hidden[2]);
    out.i32(net.spec().conv_filters);
    out.i32(net.spec().conv_dense);
    out.u64(net.init_seed());
    out.u64(net.train_steps());
    out.u64(static_cast<std::uint64_t>(net.param_count()));
    for (double p : net.parameters()) out.f64(p);
    return out.bytes();
}

neural::QNetwork deserialize_network(std::span<const std::uint8_t> bytes) {
    BinaryReader r(bytes);
    if (r.u32() != kNetMagic) throw IoError("not a network checkpoint");
    if (r.u32() != kVersion) throw IoError("unsupported network checkpoint version");
    neural::ArchSpec spec;
    spec.kind = static_cast<neural::ArchKind>(r.u8());
    const std::uint32_t shape_len = r.u32();
    for (std::uint32_t i = 0; i < shape_len; ++i) r.i32(); // informational
    spec.mlp_hidden[0] = r.i32();
    spec.mlp_hidden[1] = r.i32();
    spec.mlp_hidden[2] = r.i32();
    spec.conv_filters = r.i32();
    spec.conv_dense = r.i32();
    const std::uint64_t seed = r.u64();
    const std::uint64_t steps = r.u64();
    const std::uint64_t count = r.u64();
    neural::QNetwork net(spec, seed);
    if (count != static_cast<std::uint64_t>(net.param_count()))
        throw IoError("network checkpoint: parameter count mismatch");
    auto params = net.mutable_parameters();
    for (auto& p : params) p = r.f64();
    net.set_train_steps(steps);
    return net;
}

void save_network(const neural::QNetwork& net, const std::filesystem::path& path) {
    const auto bytes = serialize_network(net);
    write_file(path, bytes);
}

neural::QNetwork load_network(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return deserialize_network(bytes);
}

void write_optimizer(BinaryWriter& w, const neural::OptimizerState& st) {
    w.i64(st.t);
    w.u64(st.m.size());
    for (double x : st.m) w.f64(x);
    for (double x : st.v) w.f64(x);
}

neural::OptimizerState read_optimizer(BinaryReader& r) {
    neural::OptimizerState st;
    st.t = r.i64();
    const std::uint64_t n = r.u64();
    st.m.resize(n);
    st.v.resize(n);
    for (auto& x : st.m) x = r.f64();
    for (auto& x : st.v) x = r.f64();
    return st;
}

void append_events_jsonl(std::ostream& os, const world::TickEvents& ev) {
    for (const auto& b : ev.births)
        os << "{\"tick\":" << ev.tick << ",\"event\":\"birth\",\"child\":" << b.child
           << ",\"parent_a\":" << b.parent_a << ",\"parent_b\":" << b.parent_b
           << ",\"x\":" << b.x << ",\"y\":" << b.y << "}\n";
    for (const auto& d : ev.deaths) {
        const char* cause = d.cause == world::TickEvents::DeathCause::Starvation ? "starvation"
                            : d.cause == world::TickEvents::DeathCause::OldAge   ? "age"
                                                                                 : "attack";
        os << "{\"tick\":" << ev.tick << ",\"event\":\"death\",\"id\":" << d.id
           << ",\"cause\":\"" << cause << "\",\"age\":" << d.age
           << ",\"family\":" << d.family << "}\n";
    }
    for (const auto& a : ev.attacks)
        os << "{\"tick\":" << ev.tick << ",\"event\":\"attack\",\"attacker\":" << a.attacker
           << ",\"victim\":" << a.victim << ",\"lethal\":" << (a.lethal ? "true" : "false")
           << ",\"blocked\":" << (a.blocked ? "true" : "false")
           << ",\"kinship\":" << a.kinship << "}\n";
    for (const auto& h : ev.harvests)
        os << "{\"tick\":" << ev.tick << ",\"event\":\"harvest\",\"id\":" << h.id
           << ",\"amount\":" << h.amount << "}\n";
}

std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t hash = 14695981039346656037ULL;
    for (char c : text) {
        hash ^= static_cast<std::uint8_t>(c);
        hash *= 1099511628211ULL;
    }
    return hash;
}

std::string hash_hex(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

void save_episode_log(const EpisodeLog& log, const std::filesystem::path& path) {
    BinaryWriter out;
    out.u32(kEpisodeMagic);
    out.u32(kVersion);
    write_world_config(out, log.config);
    out.u32(static_cast<std::uint32_t>(log.assignment.size()));
    for (std::int32_t s : log.assignment) out.i32(s);
    out.u64(log.actions.size());
    for (const auto& tick : log.actions) {
        out.u32(static_cast<std::uint32_t>(tick.size()));
        for (const auto& [id, action] : tick) {
            out.i64(id);
            out.u8(action);
        }
    }
    write_file(path, out.bytes());
}

EpisodeLog load_episode_log(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    BinaryReader r(bytes);
    if (r.u32() != kEpisodeMagic) throw IoError("not an episode log");
    if (r.u32() != kVersion) throw IoError("unsupported episode log version");
    EpisodeLog log;
    log.config = read_world_config(r);
    const std::uint32_t slots = r.u32();
    log.assignment.resize(slots);
    for (auto& s : log.assignment) s = r.i32();
    const std::uint64_t ticks = r.u64();
    log.actions.resize(ticks);
    for (auto& tick : log.actions) {
        const std::uint32_t n = r.u32();
        tick.resize(n);
        for (auto& [id, action] : tick) {
            id = r.i64();
            action = r.u8();
        }
    }
    return log;
}

} // namespace evogrid::io
