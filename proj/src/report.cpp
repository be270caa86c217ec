#include "grslab/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace grs {

std::string format_number(double x, int significant_digits) {
  if (!std::isfinite(x)) return "null";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", significant_digits, x);
  return buf;
}

std::string json_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", static_cast<unsigned>(c));
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out;
}

void JsonWriter::indent() { out_.append(2 * stack_.size(), ' '); }

void JsonWriter::element_prefix() {
  if (after_key_) return;  // value follows its key on the same line
  if (stack_.empty()) {
    if (root_written_) throw std::logic_error("json: more than one root value");
    return;
  }
  Frame& top = stack_.back();
  if (top.type == 'o') throw std::logic_error("json: object member without a key");
  if (top.count > 0) out_ += ',';
  out_ += '\n';
  indent();
}

void JsonWriter::close_value() {
  after_key_ = false;
  if (stack_.empty()) {
    root_written_ = true;
  } else {
    ++stack_.back().count;
  }
}

JsonWriter& JsonWriter::raw_token(std::string_view tok) {
  element_prefix();
  out_ += tok;
  close_value();
  return *this;
}

JsonWriter& JsonWriter::key(std::string_view k) {
  if (stack_.empty() || stack_.back().type != 'o')
    throw std::logic_error("json: key outside an object");
  if (after_key_) throw std::logic_error("json: key after key");
  if (stack_.back().count > 0) out_ += ',';
  out_ += '\n';
  indent();
  out_ += '"';
  out_ += json_escape(k);
  out_ += "\": ";
  after_key_ = true;
  return *this;
}

JsonWriter& JsonWriter::begin_object() {
  element_prefix();
  after_key_ = false;
  out_ += '{';
  stack_.push_back({'o', 0});
  return *this;
}

JsonWriter& JsonWriter::end_object() {
  if (stack_.empty() || stack_.back().type != 'o' || after_key_)
    throw std::logic_error("json: unbalanced end_object");
  const std::size_t members = stack_.back().count;
  stack_.pop_back();
  if (members > 0) {
    out_ += '\n';
    indent();
  }
  out_ += '}';
  close_value();
  return *this;
}

JsonWriter& JsonWriter::begin_array() {
  element_prefix();
  after_key_ = false;
  out_ += '[';
  stack_.push_back({'a', 0});
  return *this;
}

JsonWriter& JsonWriter::end_array() {
  if (stack_.empty() || stack_.back().type != 'a' || after_key_)
    throw std::logic_error("json: unbalanced end_array");
  const std::size_t members = stack_.back().count;
  stack_.pop_back();
  if (members > 0) {
    out_ += '\n';
    indent();
  }
  out_ += ']';
  close_value();
  return *this;
}

JsonWriter& JsonWriter::value(double x) { return raw_token(format_number(x)); }
JsonWriter& JsonWriter::value(long long x) { return raw_token(std::to_string(x)); }
JsonWriter& JsonWriter::value(unsigned long long x) { return raw_token(std::to_string(x)); }
JsonWriter& JsonWriter::value(bool b) { return raw_token(b ? "true" : "false"); }
JsonWriter& JsonWriter::value_null() { return raw_token("null"); }

JsonWriter& JsonWriter::value(std::string_view s) {
  element_prefix();
  out_ += '"';
  out_ += json_escape(s);
  out_ += '"';
  close_value();
  return *this;
}

std::string JsonWriter::take() {
  if (!stack_.empty()) throw std::logic_error("json: document still open");
  if (!root_written_) throw std::logic_error("json: empty document");
  out_ += '\n';
  return std::move(out_);
}

std::string spectrum_csv(const std::vector<SpectrumCsvRow>& rows) {
  std::string out = "index,eigenvalue,residual,tags\n";
  for (const auto& r : rows) {
    out += std::to_string(r.index);
    out += ',';
    out += format_number(r.eigenvalue);
    out += ',';
    out += format_number(r.residual);
    out += ',';
    const bool quote = r.tags.find_first_of(",\"\n") != std::string::npos;
    if (quote) {
      out += '"';
      for (char c : r.tags) {
        if (c == '"') out += '"';
        out += c;
      }
      out += '"';
    } else {
      out += r.tags;
    }
    out += '\n';
  }
  return out;
}

void write_text_file(const std::string& path, std::string_view content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open output file: " + path);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw std::runtime_error("failed writing output file: " + path);
}

}  // namespace grs
