#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "w2vt/corpus.hpp"

namespace w2vt::testing {

inline Corpus corpus_of(const std::vector<std::vector<std::string>>& seqs, std::uint64_t min_count = 1) {
  return Corpus::from_tokens(seqs, {}, min_count);
}

inline std::vector<std::string> tokens_of(const Corpus& c, std::size_t s) {
  std::vector<std::string> out;
  for (auto id : c.sequences()[s]) out.push_back(c.vocab().token(id));
  return out;
}

/// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / ("w2vt_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace w2vt::testing
