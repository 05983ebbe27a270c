#pragma once

#include <filesystem>
#include <string>

#include "evogrid/io.hpp"
#include "evogrid/world.hpp"

namespace evogrid::render {

enum class Format { Text, Pixmap };

/// One UTF-8 text frame. Legend: '.' no food, ',' low food, ':' at least half
/// capacity, '#' source at capacity; agents show their family digit (first
/// allele mod 10).
std::string text_frame(const world::World& w);

/// Binary PPM (P6); each tile is cell_size x cell_size pixels. Dirt is dark,
/// sources shade green with fill, agents use a per-family palette.
void write_ppm_frame(const world::World& w, const std::filesystem::path& path,
                     int cell_size);

std::string legend();

/// Replays a recorded episode and writes frame_<tick>.txt/.ppm files.
/// Returns the number of frames written (episode length + 1; the initial
/// state is frame 0).
int render_episode(const io::EpisodeLog& log, const std::filesystem::path& out_dir,
                   Format format, int cell_size = 8);

} // namespace evogrid::render
