#pragma once

#include "reid/metrics.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace reid {

// Compact JSON emitter with caller-fixed key order. Doubles are printed with
// 17 significant digits so output is byte-stable and round-trips.
class JsonWriter {
 public:
  JsonWriter& begin_object();
  JsonWriter& end_object();
  JsonWriter& begin_array();
  JsonWriter& end_array();
  JsonWriter& key(std::string_view name);
  JsonWriter& value(double v);
  JsonWriter& value(std::int64_t v);
  JsonWriter& value(std::uint64_t v);
  JsonWriter& value(int v) { return value(static_cast<std::int64_t>(v)); }
  JsonWriter& value(bool v);
  JsonWriter& value(std::string_view v);
  JsonWriter& value(const char* v) { return value(std::string_view(v)); }
  JsonWriter& null();
  // Inserts an already serialised JSON value verbatim.
  JsonWriter& raw(std::string_view json);
  JsonWriter& value(const std::vector<double>& values);

  template <typename T>
  JsonWriter& value(const std::optional<T>& v) {
    return v ? value(*v) : null();
  }

  const std::string& str() const { return out_; }

 private:
  void separate();

  std::string out_;
  std::vector<bool> first_;  // per open container: no element written yet
  bool after_key_ = false;
};

std::string format_double(double v);

std::string to_json(const EvalReport& report, bool include_per_query = false);

// Header line plus one data line:
// rank1,rank5,rank10,rank20,map,minp,n_evaluated,n_skipped
std::string to_csv(const EvalReport& report);

// Human-readable table in percent, rounded to 0.1.
std::string summary_table(const EvalReport& report);

}  // namespace reid
