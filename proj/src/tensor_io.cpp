#include "spectrahack/tensor_io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <string_view>

#include "spectrahack/error.hpp"

namespace spectrahack {
namespace {

constexpr unsigned char kMagic[4] = {'E', 'M', 'B', '1'};

std::uint64_t load_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void store_u64_le(std::uint64_t v, unsigned char* p) {
  for (int i = 0; i < 8; ++i) {
    p[i] = static_cast<unsigned char>(v & 0xffu);
    v >>= 8;
  }
}

double load_f64_le(const unsigned char* p) {
  return std::bit_cast<double>(load_u64_le(p));
}

void store_f64_le(double v, unsigned char* p) {
  store_u64_le(std::bit_cast<std::uint64_t>(v), p);
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::IoFailure, "read failed: " + path.string());
  return bytes;
}

void check_finite(std::span<const double> data) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw Error(ErrorCode::NonFiniteValue,
                  "non-finite value at flat index " + std::to_string(i), i);
    }
  }
}

// CSV tokenizer: handles quoted fields, "\n" and "\r\n" endings, and a
// missing trailing newline. Blank lines are dropped.
std::vector<std::vector<std::string>> split_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool row_has_content = false;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
  };
  auto end_row = [&] {
    end_field();
    if (row_has_content || row.size() > 1 || !row.front().empty()) {
      rows.push_back(std::move(row));
    }
    row.clear();
    row_has_content = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        row_has_content = true;
        break;
      case ',':
        end_field();
        row_has_content = true;
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') break;
        field.push_back(c);
        break;
      case '\n':
        end_row();
        break;
      default:
        field.push_back(c);
    }
  }
  if (in_quotes) throw Error(ErrorCode::ParseFailure, "unterminated quoted field");
  if (!field.empty() || !row.empty()) end_row();
  return rows;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

bool try_parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool row_is_numeric(const std::vector<std::string>& row) {
  double tmp = 0.0;
  for (const auto& f : row) {
    if (!try_parse_double(f, tmp)) return false;
  }
  return true;
}

}  // namespace

RawMatrix::RawMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (rows_ == 0 || cols_ == 0) {
    throw Error(ErrorCode::ShapeMismatch, "matrix must have at least one row and column");
  }
  if (cols_ > std::numeric_limits<std::size_t>::max() / rows_ ||
      data_.size() != rows_ * cols_) {
    throw Error(ErrorCode::ShapeMismatch,
                "data length " + std::to_string(data_.size()) + " != " +
                    std::to_string(rows_) + "x" + std::to_string(cols_));
  }
  check_finite(data_);
}

RawMatrix parse_emb1(std::span<const unsigned char> bytes) {
  if (bytes.size() < kEmb1HeaderBytes ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::MalformedHeader, "missing EMB1 magic or truncated header");
  }
  const std::uint64_t rows = load_u64_le(bytes.data() + 4);
  const std::uint64_t cols = load_u64_le(bytes.data() + 12);
  if (rows == 0 || cols == 0) {
    throw Error(ErrorCode::MalformedHeader, "zero rows or cols in header");
  }
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
  if (cols > kMax / rows || rows * cols > (kMax - kEmb1HeaderBytes) / 8) {
    throw Error(ErrorCode::MalformedHeader, "rows*cols overflows a 64-bit count");
  }
  const std::uint64_t count = rows * cols;
  const std::uint64_t payload = bytes.size() - kEmb1HeaderBytes;
  if (payload != count * 8) {
    throw Error(ErrorCode::ShapeMismatch,
                "payload holds " + std::to_string(payload) + " bytes, header declares " +
                    std::to_string(count) + " float64 values");
  }
  std::vector<double> data(count);
  const unsigned char* p = bytes.data() + kEmb1HeaderBytes;
  for (std::uint64_t i = 0; i < count; ++i) data[i] = load_f64_le(p + 8 * i);
  check_finite(data);
  return RawMatrix(rows, cols, std::move(data));
}

std::vector<unsigned char> encode_emb1(const RawMatrix& matrix) {
  std::vector<unsigned char> out(kEmb1HeaderBytes + matrix.data().size() * 8);
  std::memcpy(out.data(), kMagic, sizeof(kMagic));
  store_u64_le(matrix.rows(), out.data() + 4);
  store_u64_le(matrix.cols(), out.data() + 12);
  unsigned char* p = out.data() + kEmb1HeaderBytes;
  for (double v : matrix.data()) {
    store_f64_le(v, p);
    p += 8;
  }
  return out;
}

RawMatrix read_emb1(const std::filesystem::path& path) {
  const std::string bytes = slurp(path);
  return parse_emb1(std::span(reinterpret_cast<const unsigned char*>(bytes.data()),
                              bytes.size()));
}

void write_emb1(const RawMatrix& matrix, const std::filesystem::path& path) {
  const auto bytes = encode_emb1(matrix);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
}

RawMatrix parse_csv_matrix(const std::string& text) {
  auto rows = split_csv(text);
  if (!rows.empty() && !row_is_numeric(rows.front())) rows.erase(rows.begin());
  if (rows.empty()) throw Error(ErrorCode::ParseFailure, "no numeric rows");
  const std::size_t cols = rows.front().size();
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) {
      throw Error(ErrorCode::RaggedRows,
                  "row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) +
                      " fields, expected " + std::to_string(cols),
                  r);
    }
    for (const auto& f : rows[r]) {
      double v = 0.0;
      if (!try_parse_double(f, v)) {
        throw Error(ErrorCode::ParseFailure, "not a number: '" + f + "'", r);
      }
      data.push_back(v);
    }
  }
  return RawMatrix(rows.size(), cols, std::move(data));
}

RawMatrix read_csv_matrix(const std::filesystem::path& path) {
  return parse_csv_matrix(slurp(path));
}

std::vector<ScoreTable> parse_score_table(const std::string& text) {
  const auto rows = split_csv(text);
  if (rows.empty()) throw Error(ErrorCode::ParseFailure, "empty score table");
  const auto& header = rows.front();
  if (header.empty() || trim(header.front()) != "model_id") {
    throw Error(ErrorCode::ParseFailure, "first column must be model_id");
  }
  std::set<std::string> seen_cols;
  for (const auto& h : header) {
    if (!seen_cols.insert(std::string(trim(h))).second) {
      throw Error(ErrorCode::ParseFailure, "duplicate column '" + h + "'");
    }
  }
  constexpr std::string_view kMetricPrefix = "metric:";
  std::vector<ScoreTable> out;
  std::set<std::string> ids;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      throw Error(ErrorCode::ParseFailure,
                  "row " + std::to_string(r) + " has " + std::to_string(row.size()) +
                      " fields, header has " + std::to_string(header.size()),
                  r);
    }
    ScoreTable entry;
    entry.model_id = std::string(trim(row.front()));
    if (!ids.insert(entry.model_id).second) {
      throw Error(ErrorCode::DuplicateModelId, "repeated model_id '" + entry.model_id + "'", r);
    }
    for (std::size_t c = 1; c < row.size(); ++c) {
      double v = 0.0;
      if (!try_parse_double(row[c], v) || !std::isfinite(v)) {
        throw Error(ErrorCode::ParseFailure, "bad value '" + row[c] + "' in column " +
                                                 header[c], r);
      }
      const std::string name(trim(header[c]));
      if (name.starts_with(kMetricPrefix)) {
        entry.metric_values[name.substr(kMetricPrefix.size())] = v;
      } else {
        entry.ground_truth[name] = v;
      }
    }
    if (!entry.ground_truth.contains(kComprehensiveColumn) && !entry.ground_truth.empty()) {
      double sum = 0.0;
      for (const auto& [_, v] : entry.ground_truth) sum += v;
      entry.ground_truth[kComprehensiveColumn] =
          sum / static_cast<double>(entry.ground_truth.size());
    }
    out.push_back(std::move(entry));
  }
  return out;
}

std::vector<ScoreTable> read_score_table(const std::filesystem::path& path) {
  return parse_score_table(slurp(path));
}

RawMatrix read_matrix_auto(const std::filesystem::path& path) {
  const std::string bytes = slurp(path);
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0) {
    return parse_emb1(std::span(reinterpret_cast<const unsigned char*>(bytes.data()),
                                bytes.size()));
  }
  return parse_csv_matrix(bytes);
}

}  // namespace spectrahack
