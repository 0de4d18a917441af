#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>

#include "harmclf/corpus.hpp"

namespace fixture {

// TSV with n_pos rows labeled pos_name and n_neg labeled neg_name,
// interleaved so neither class is contiguous.
inline void write_counts(const std::filesystem::path& path, std::size_t n_pos, std::size_t n_neg,
                         const std::string& pos_name, const std::string& neg_name) {
  std::ofstream out(path);
  out << "id\ttext\tlabel\n";
  std::size_t p = 0, n = 0, row = 0;
  while (p < n_pos || n < n_neg) {
    const bool positive = n >= n_neg || (p < n_pos && (row % 2 == 0));
    out << "r" << row << "\tسطر " << row << " متن\t" << (positive ? pos_name : neg_name) << "\n";
    (positive ? p : n)++;
    ++row;
  }
}

inline harmclf::Dataset make_dataset(std::size_t n_pos, std::size_t n_neg, const std::string& prefix = "x") {
  harmclf::Dataset ds;
  ds.name = "made";
  for (std::size_t i = 0; i < n_pos + n_neg; ++i)
    ds.examples.push_back({prefix + std::to_string(i), "t " + std::to_string(i), i < n_pos ? 1 : 0});
  return ds;
}

}  // namespace fixture
