#pragma once
// Deterministic report serialization: an insertion-ordered streaming JSON
// writer with fixed floating-point formatting (12 significant digits, ties to
// even) so identical runs produce byte-identical documents, plus the
// fixed-column spectrum CSV and a small file-output helper.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace grs {

// Fixed-width significant-digit formatting used for every number in every
// report. Non-finite values serialize as JSON null.
std::string format_number(double x, int significant_digits = 12);

class JsonWriter {
 public:
  JsonWriter& begin_object();
  JsonWriter& end_object();
  JsonWriter& begin_array();
  JsonWriter& end_array();
  JsonWriter& key(std::string_view k);

  JsonWriter& value(double x);
  JsonWriter& value(long long x);
  JsonWriter& value(int x) { return value(static_cast<long long>(x)); }
  JsonWriter& value(unsigned long long x);
  JsonWriter& value(bool b);
  JsonWriter& value(std::string_view s);
  JsonWriter& value(const char* s) { return value(std::string_view(s)); }
  JsonWriter& value_null();

  // Convenience for the dominant pattern.
  template <typename T>
  JsonWriter& kv(std::string_view k, T&& v) {
    key(k);
    return value(std::forward<T>(v));
  }

  // Finished document text (fails if objects or arrays are still open).
  std::string take();

 private:
  void element_prefix();
  void close_value();
  JsonWriter& raw_token(std::string_view tok);
  void indent();

  struct Frame {
    char type = 'o';  // 'o' object, 'a' array
    std::size_t count = 0;
  };
  std::string out_;
  std::vector<Frame> stack_;
  bool after_key_ = false;
  bool root_written_ = false;
};

std::string json_escape(std::string_view s);

struct SpectrumCsvRow {
  long long index = 0;
  double eigenvalue = 0.0;
  double residual = 0.0;
  std::string tags;
};

// Renders the fixed-header table: index,eigenvalue,residual,tags.
std::string spectrum_csv(const std::vector<SpectrumCsvRow>& rows);

// Writes content to path, creating parent directories as needed.
void write_text_file(const std::string& path, std::string_view content);

}  // namespace grs
