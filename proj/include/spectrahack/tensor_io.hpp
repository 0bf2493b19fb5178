#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace spectrahack {

// Dense row-major matrix of finite doubles, as loaded from disk.
class RawMatrix {
 public:
  RawMatrix() = default;
  // Validates rows, cols >= 1, data.size() == rows * cols and finiteness.
  RawMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols_, cols_);
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  friend bool operator==(const RawMatrix&, const RawMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct ScoreTable {
  std::string model_id;
  std::map<std::string, double> metric_values;
  std::map<std::string, double> ground_truth;
};

// Name of the comprehensive-evaluation column (mean of the benchmarks).
inline constexpr const char* kComprehensiveColumn = "CE";

// EMB1: "EMB1" magic, u64 LE rows, u64 LE cols, rows*cols f64 LE row-major.
inline constexpr std::size_t kEmb1HeaderBytes = 20;

RawMatrix read_emb1(const std::filesystem::path& path);
void write_emb1(const RawMatrix& matrix, const std::filesystem::path& path);

// Parses EMB1 bytes already in memory; read_emb1 is a thin wrapper.
RawMatrix parse_emb1(std::span<const unsigned char> bytes);
std::vector<unsigned char> encode_emb1(const RawMatrix& matrix);

RawMatrix read_csv_matrix(const std::filesystem::path& path);
RawMatrix parse_csv_matrix(const std::string& text);

// Columns: model_id, then numeric columns. Columns named "metric:<name>" go
// to metric_values, all others are benchmarks. CE is appended as the mean of
// the benchmarks when the table does not carry one.
std::vector<ScoreTable> read_score_table(const std::filesystem::path& path);
std::vector<ScoreTable> parse_score_table(const std::string& text);

// Dispatches on content: EMB1 magic, otherwise CSV.
RawMatrix read_matrix_auto(const std::filesystem::path& path);

}  // namespace spectrahack
