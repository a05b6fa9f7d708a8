#include "mob2vec/cdr.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>

#include "mob2vec/errors.hpp"

namespace mob2vec {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line, char delimiter) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delimiter, start);
    if (pos == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return fields;
}

struct Indexed {
  CdrEvent event;
  std::size_t order;
};

}  // namespace

std::vector<CdrTrajectory> parse_cdr(std::istream& in, const ParseOptions& options) {
  std::map<UserId, std::vector<Indexed>> by_user;
  std::string line;
  std::size_t line_no = 0;
  std::size_t order = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && options.has_header) continue;
    const auto content = trim(line);
    if (content.empty()) continue;

    const auto fields = split(content, options.delimiter);
    if (fields.size() < 3) throw RecordError(line_no, "expected 3 fields, got " + std::to_string(fields.size()));

    CdrEvent event;
    for (std::size_t i = 0; i < 3; ++i) {
      const auto value = fields[i];
      switch (options.field_order[i]) {
        case CdrField::kUser:
          if (value.empty()) throw RecordError(line_no, "missing user id");
          event.user_id = std::string(value);
          break;
        case CdrField::kTimestamp: {
          const auto ts = parse_timestamp(value, options.zone);
          if (!ts) throw RecordError(line_no, "malformed timestamp '" + std::string(value) + "'");
          event.timestamp = *ts;
          break;
        }
        case CdrField::kLocation:
          if (value.empty()) throw RecordError(line_no, "missing location");
          event.location = SymbolicLocation(std::string(value));
          break;
      }
    }
    if (options.observation_period) {
      const auto& p = *options.observation_period;
      if (event.timestamp < p.start || event.timestamp >= p.end) {
        throw RecordError(line_no, "timestamp outside observation period");
      }
    }
    auto& bucket = by_user[event.user_id];
    bucket.push_back({std::move(event), order++});
  }

  std::vector<CdrTrajectory> out;
  out.reserve(by_user.size());
  for (auto& [user, records] : by_user) {
    std::stable_sort(records.begin(), records.end(), [](const Indexed& a, const Indexed& b) {
      return a.event.timestamp < b.event.timestamp;
    });
    CdrTrajectory traj;
    traj.user_id = user;
    traj.events.reserve(records.size());
    // Exact duplicates share a timestamp, so they sit inside one tie group.
    std::size_t group_start = 0;
    for (auto& r : records) {
      if (!traj.events.empty() && traj.events.back().timestamp != r.event.timestamp) {
        group_start = traj.events.size();
      }
      const bool duplicate = std::any_of(traj.events.begin() + static_cast<std::ptrdiff_t>(group_start),
                                         traj.events.end(),
                                         [&](const CdrEvent& e) { return e == r.event; });
      if (!duplicate) traj.events.push_back(std::move(r.event));
    }
    out.push_back(std::move(traj));
  }
  return out;
}

void write_cdr(std::ostream& out, const std::vector<CdrTrajectory>& trajectories,
               const ParseOptions& options, TimestampFormat format) {
  const auto name = [](CdrField f) {
    switch (f) {
      case CdrField::kUser: return "user_id";
      case CdrField::kTimestamp: return "timestamp";
      case CdrField::kLocation: return "location";
    }
    return "";
  };
  if (options.has_header) {
    out << name(options.field_order[0]) << options.delimiter << name(options.field_order[1])
        << options.delimiter << name(options.field_order[2]) << '\n';
  }
  for (const auto& traj : trajectories) {
    for (const auto& e : traj.events) {
      for (std::size_t i = 0; i < 3; ++i) {
        if (i > 0) out << options.delimiter;
        switch (options.field_order[i]) {
          case CdrField::kUser: out << e.user_id; break;
          case CdrField::kTimestamp:
            if (format == TimestampFormat::kEpoch) {
              out << e.timestamp;
            } else {
              out << format_timestamp(e.timestamp, options.zone);
            }
            break;
          case CdrField::kLocation: out << e.location.label(); break;
        }
      }
      out << '\n';
    }
  }
}

Symbol LocationDictionary::intern(const SymbolicLocation& location) {
  auto [it, inserted] = index_.emplace(location, static_cast<Symbol>(labels_.size()));
  if (inserted) labels_.push_back(location);
  return it->second;
}

std::optional<Symbol> LocationDictionary::find(const SymbolicLocation& location) const {
  const auto it = index_.find(location);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

}  // namespace mob2vec
