#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "depman/simulator.hpp"

namespace depman {

inline constexpr int kLogSchema = 1;

nlohmann::json tick_to_json(const TickRecord& r);
TickRecord tick_from_json(const nlohmann::json& j);

/// JSON lines: a header {"type":"episode"}, one {"type":"tick"} per record, and a
/// trailing {"type":"summary"} with per-target outcomes.
void write_jsonl(std::ostream& out, const EpisodeLog& log);
void write_jsonl(const std::string& path, const EpisodeLog& log);
EpisodeLog read_jsonl(std::istream& in);
EpisodeLog read_jsonl(const std::string& path);

/// Flat CSV of the tick records, one row per tick.
void write_csv(std::ostream& out, const EpisodeLog& log);
void write_csv(const std::string& path, const EpisodeLog& log);

}  // namespace depman
