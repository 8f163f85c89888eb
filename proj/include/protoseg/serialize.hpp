#ifndef PROTOSEG_SERIALIZE_HPP
#define PROTOSEG_SERIALIZE_HPP

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "protoseg/distill.hpp"
#include "protoseg/episode.hpp"

namespace protoseg {

// All round-trips below are bit-exact: JSON doubles use shortest round-trip
// formatting, the binary format stores raw little-endian IEEE doubles.

nlohmann::json spec_to_json(const SyntheticSpec& spec);
SyntheticSpec spec_from_json(const nlohmann::json& j);

nlohmann::json episode_to_json(const Episode& episode);
Episode episode_from_json(const nlohmann::json& j);

nlohmann::json net_to_json(const ThresholdNet& net);
ThresholdNet net_from_json(const nlohmann::json& j);

enum class EpisodeFileFormat { json, binary };

struct EpisodeFile {
    SyntheticSpec spec;
    std::vector<Episode> episodes;
};

void write_episode_file(const std::filesystem::path& path, const EpisodeFile& file,
                        EpisodeFileFormat format);
EpisodeFile read_episode_file(const std::filesystem::path& path);

void write_net_file(const std::filesystem::path& path, const ThresholdNet& net);
ThresholdNet read_net_file(const std::filesystem::path& path);

// Shortest representation that parses back to the identical double.
std::string format_double(double v);

// Writes to a temporary sibling and renames into place, so failures never
// leave a partial file behind.
void atomic_write(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

}  // namespace protoseg

#endif  // PROTOSEG_SERIALIZE_HPP
