#include "reid/report.hpp"

#include <cmath>
#include <cstdio>

namespace reid {

namespace {

constexpr std::size_t kSummaryRanks[] = {1, 5, 10, 20};

void append_escaped(std::string& out, std::string_view s) {
  out.push_back('"');
  for (const char ch : s) {
    switch (ch) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(ch) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", static_cast<unsigned>(ch));
          out += buf;
        } else {
          out.push_back(ch);
        }
    }
  }
  out.push_back('"');
}

}  // namespace

std::string format_double(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void JsonWriter::separate() {
  if (after_key_) {
    after_key_ = false;
    return;
  }
  if (!first_.empty()) {
    if (!first_.back()) out_.push_back(',');
    first_.back() = false;
  }
}

JsonWriter& JsonWriter::begin_object() {
  separate();
  out_.push_back('{');
  first_.push_back(true);
  return *this;
}

JsonWriter& JsonWriter::end_object() {
  out_.push_back('}');
  first_.pop_back();
  return *this;
}

JsonWriter& JsonWriter::begin_array() {
  separate();
  out_.push_back('[');
  first_.push_back(true);
  return *this;
}

JsonWriter& JsonWriter::end_array() {
  out_.push_back(']');
  first_.pop_back();
  return *this;
}

JsonWriter& JsonWriter::key(std::string_view name) {
  separate();
  append_escaped(out_, name);
  out_.push_back(':');
  after_key_ = true;
  return *this;
}

JsonWriter& JsonWriter::value(double v) {
  separate();
  out_ += format_double(v);
  return *this;
}

JsonWriter& JsonWriter::value(std::int64_t v) {
  separate();
  out_ += std::to_string(v);
  return *this;
}

JsonWriter& JsonWriter::value(std::uint64_t v) {
  separate();
  out_ += std::to_string(v);
  return *this;
}

JsonWriter& JsonWriter::value(bool v) {
  separate();
  out_ += v ? "true" : "false";
  return *this;
}

JsonWriter& JsonWriter::value(std::string_view v) {
  separate();
  append_escaped(out_, v);
  return *this;
}

JsonWriter& JsonWriter::null() {
  separate();
  out_ += "null";
  return *this;
}

JsonWriter& JsonWriter::raw(std::string_view json) {
  separate();
  out_ += json;
  return *this;
}

JsonWriter& JsonWriter::value(const std::vector<double>& values) {
  begin_array();
  for (double v : values) value(v);
  return end_array();
}

std::string to_json(const EvalReport& report, bool include_per_query) {
  JsonWriter w;
  w.begin_object();
  w.key("cmc").value(report.cmc);
  w.key("map").value(report.map);
  w.key("minp").value(report.minp);
  w.key("n_evaluated").value(static_cast<std::uint64_t>(report.n_evaluated));
  w.key("n_skipped").value(static_cast<std::uint64_t>(report.n_skipped));
  if (include_per_query) {
    w.key("per_query").begin_array();
    for (const auto& q : report.per_query) {
      auto rank = [](const std::optional<std::size_t>& r) -> std::optional<std::uint64_t> {
        if (!r) return std::nullopt;
        return static_cast<std::uint64_t>(*r);
      };
      w.begin_object();
      w.key("query_index").value(static_cast<std::uint64_t>(q.query_index));
      w.key("num_valid_matches").value(static_cast<std::uint64_t>(q.num_valid_matches));
      w.key("first_match_rank").value(rank(q.first_match_rank));
      w.key("hardest_match_rank").value(rank(q.hardest_match_rank));
      w.key("ap").value(q.ap);
      w.key("inp").value(q.inp);
      w.key("skipped").value(q.skipped);
      w.end_object();
    }
    w.end_array();
  }
  w.end_object();
  return w.str() + "\n";
}

std::string to_csv(const EvalReport& report) {
  std::string out = "rank1,rank5,rank10,rank20,map,minp,n_evaluated,n_skipped\n";
  for (std::size_t k : kSummaryRanks) out += format_double(report.cmc_at(k)) + ",";
  out += format_double(report.map) + "," + format_double(report.minp) + "," +
         std::to_string(report.n_evaluated) + "," + std::to_string(report.n_skipped) +
         "\n";
  return out;
}

std::string summary_table(const EvalReport& report) {
  char buf[256];
  std::string out;
  for (std::size_t k : kSummaryRanks) {
    std::snprintf(buf, sizeof(buf), "Rank-%-3zu %6.1f%%\n", k, 100.0 * report.cmc_at(k));
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "mAP      %6.1f%%\nmINP     %6.1f%%\n", 100.0 * report.map,
                100.0 * report.minp);
  out += buf;
  std::snprintf(buf, sizeof(buf), "queries  %zu evaluated, %zu skipped\n", report.n_evaluated,
                report.n_skipped);
  out += buf;
  return out;
}

}  // namespace reid
