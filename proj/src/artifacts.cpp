#include "mob2vec/artifacts.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "mob2vec/errors.hpp"

namespace mob2vec {

namespace {

using nlohmann::json;

template <typename T>
std::string shortest(T v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

template <typename T>
T parse_number(std::string_view text, std::size_t line, const char* what) {
  T v{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw RecordError(line, std::string("malformed ") + what + " '" + std::string(text) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    out.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

/// Whitespace-separated tokens parsed as numbers.
template <typename T>
std::vector<T> numbers(std::string_view text, std::size_t line, const char* what) {
  std::vector<T> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && text[i] == ' ') ++i;
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ') ++j;
    if (j > i) out.push_back(parse_number<T>(text.substr(i, j - i), line, what));
    i = j;
  }
  return out;
}

template <typename F>
void for_each_json_line(std::istream& in, F&& f) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      f(json::parse(line));
    } catch (const json::exception& e) {
      throw RecordError(line_no, e.what());
    }
  }
}

}  // namespace

void write_summaries(std::ostream& out, const std::vector<SummaryTrajectory>& summaries) {
  for (const auto& s : summaries) {
    json segments = json::array();
    for (const auto& seg : s.segments) {
      segments.push_back({seg.interval.start, seg.interval.end, seg.location.label()});
    }
    out << json{{"user", s.user_id},
                {"segments", std::move(segments)},
                {"local_noise", s.local_noise_count()},
                {"transitions", s.transition_count()}}
               .dump()
        << '\n';
  }
}

std::vector<SummaryTrajectory> read_summaries(std::istream& in) {
  std::vector<SummaryTrajectory> out;
  for_each_json_line(in, [&](const json& j) {
    SummaryTrajectory s;
    s.user_id = j.at("user").get<std::string>();
    for (const auto& seg : j.at("segments")) {
      SummarySegment segment;
      segment.interval = {seg.at(0).get<Timestamp>(), seg.at(1).get<Timestamp>()};
      segment.location = SymbolicLocation(seg.at(2).get<std::string>());
      s.segments.push_back(std::move(segment));
    }
    out.push_back(std::move(s));
  });
  return out;
}

void write_rank_trajectories(std::ostream& out, const std::vector<RankTrajectory>& ranks) {
  for (const auto& r : ranks) {
    json segments = json::array();
    for (const auto& seg : r.segments) segments.push_back({seg.interval.start, seg.interval.end, seg.rank});
    json locations = json::array();
    for (const auto& l : r.locations) locations.push_back(l.label());
    out << json{{"user", r.user_id}, {"segments", std::move(segments)}, {"locations", std::move(locations)}}.dump()
        << '\n';
  }
}

std::vector<RankTrajectory> read_rank_trajectories(std::istream& in) {
  std::vector<RankTrajectory> out;
  for_each_json_line(in, [&](const json& j) {
    RankTrajectory r;
    r.user_id = j.at("user").get<std::string>();
    for (const auto& seg : j.at("segments")) {
      r.segments.push_back({{seg.at(0).get<Timestamp>(), seg.at(1).get<Timestamp>()}, seg.at(2).get<Symbol>()});
    }
    for (const auto& l : j.at("locations")) r.locations.emplace_back(l.get<std::string>());
    out.push_back(std::move(r));
  });
  return out;
}

void write_weekly(std::ostream& out, const std::map<UserId, std::vector<WeeklyTrajectory>>& weeks) {
  for (const auto& [user, list] : weeks) {
    for (const auto& w : list) {
      out << user << '\t' << w.week_index << '\t';
      for (std::size_t i = 0; i < w.ranks.size(); ++i) out << (i ? " " : "") << w.ranks[i];
      out << '\n';
    }
  }
}

std::map<UserId, std::vector<WeeklyTrajectory>> read_weekly(std::istream& in) {
  std::map<UserId, std::vector<WeeklyTrajectory>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 3 || fields[0].empty()) throw RecordError(line_no, "expected user<TAB>week<TAB>symbols");
    WeeklyTrajectory w;
    w.user_id = std::string(fields[0]);
    w.week_index = parse_number<int>(fields[1], line_no, "week index");
    if (w.week_index < 1) throw RecordError(line_no, "week index must be >= 1");
    w.ranks = numbers<Symbol>(fields[2], line_no, "symbol");
    out[w.user_id].push_back(std::move(w));
  }
  return out;
}

void write_vectors(std::ostream& out, const std::map<UserId, std::vector<float>>& vectors) {
  for (const auto& [id, v] : vectors) {
    out << id << '\t';
    for (std::size_t i = 0; i < v.size(); ++i) out << (i ? " " : "") << shortest(v[i]);
    out << '\n';
  }
}

std::map<UserId, std::vector<float>> read_vectors(std::istream& in) {
  std::map<UserId, std::vector<float>> out;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) throw RecordError(line_no, "expected id<TAB>values");
    auto v = numbers<float>(std::string_view(line).substr(tab + 1), line_no, "vector component");
    if (v.empty() || (width != 0 && v.size() != width)) throw RecordError(line_no, "vector width differs");
    width = v.size();
    out[line.substr(0, tab)] = std::move(v);
  }
  return out;
}

void write_layout(std::ostream& out, const std::vector<UserId>& users, const PointMatrix& layout) {
  if (static_cast<std::size_t>(layout.rows()) != users.size() || layout.cols() != 2) {
    throw DataError("write_layout: expected one 2D point per user");
  }
  out << "user_id,x,y\n";
  for (std::size_t i = 0; i < users.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    out << users[i] << ',' << shortest(layout(row, 0)) << ',' << shortest(layout(row, 1)) << '\n';
  }
}

std::pair<std::vector<UserId>, PointMatrix> read_layout(std::istream& in) {
  std::vector<UserId> users;
  std::vector<std::pair<double, double>> points;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || (line_no == 1 && line == "user_id,x,y")) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 3) throw RecordError(line_no, "expected user_id,x,y");
    users.emplace_back(fields[0]);
    points.emplace_back(parse_number<double>(fields[1], line_no, "coordinate"),
                        parse_number<double>(fields[2], line_no, "coordinate"));
  }
  PointMatrix layout(static_cast<Eigen::Index>(points.size()), 2);
  for (std::size_t i = 0; i < points.size(); ++i) {
    layout(static_cast<Eigen::Index>(i), 0) = points[i].first;
    layout(static_cast<Eigen::Index>(i), 1) = points[i].second;
  }
  return {std::move(users), std::move(layout)};
}

}  // namespace mob2vec
