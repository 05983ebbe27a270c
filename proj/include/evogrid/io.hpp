#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "evogrid/neural.hpp"
#include "evogrid/world.hpp"

namespace evogrid::io {

/// Little-endian byte packing, independent of host layout.
class BinaryWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void f64(double v);
    void str(const std::string& s);
    const std::vector<std::uint8_t>& bytes() const { return buf_; }

private:
    std::vector<std::uint8_t> buf_;
};

class BinaryReader {
public:
    explicit BinaryReader(std::span<const std::uint8_t> data) : data_(data) {}
    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    double f64();
    std::string str();
    bool at_end() const { return pos_ == data_.size(); }

private:
    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

/// Canonical world snapshot ("EVGW", version 1). Two worlds with equal
/// state serialize to identical bytes.
std::vector<std::uint8_t> serialize_world(const world::World& w);
world::World deserialize_world(std::span<const std::uint8_t> bytes);

void save_world(const world::World& w, const std::filesystem::path& path);
world::World load_world(const std::filesystem::path& path);

/// Network checkpoint ("EVGN", version 1): architecture id, shape list,
/// init seed, train-step counter, then the flat parameter array (LE doubles).
std::vector<std::uint8_t> serialize_network(const neural::QNetwork& net);
neural::QNetwork deserialize_network(std::span<const std::uint8_t> bytes);

void save_network(const neural::QNetwork& net, const std::filesystem::path& path);
neural::QNetwork load_network(const std::filesystem::path& path);

void write_optimizer(BinaryWriter& w, const neural::OptimizerState& st);
neural::OptimizerState read_optimizer(BinaryReader& r);

void write_world_config(BinaryWriter& w, const world::WorldConfig& cfg);
world::WorldConfig read_world_config(BinaryReader& r);

/// Per-tick event records as line-delimited JSON.
void append_events_jsonl(std::ostream& os, const world::TickEvents& ev);

/// FNV-1a 64-bit, used to fingerprint configs in artifacts.
std::uint64_t fnv1a64(std::string_view text);
std::string hash_hex(std::uint64_t h);

/// Recorded episode ("EVGE", version 1): world config + policy assignment +
/// the action stream, enough to replay the episode deterministically.
struct EpisodeLog {
    world::WorldConfig config;
    std::vector<std::int32_t> assignment;
    // actions[t] holds (agent id, action index) pairs for tick t.
    std::vector<std::vector<std::pair<world::AgentId, std::uint8_t>>> actions;
};

void save_episode_log(const EpisodeLog& log, const std::filesystem::path& path);
EpisodeLog load_episode_log(const std::filesystem::path& path);

} // namespace evogrid::io
