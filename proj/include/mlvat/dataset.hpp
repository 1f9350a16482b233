#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mlvat {

enum class Split { Train, Dev, Test };

std::string_view split_name(Split s) noexcept;
Split parse_split(std::string_view name);

inline constexpr std::size_t kSemEvalLabels = 11;
inline constexpr std::array<std::string_view, kSemEvalLabels> kSemEvalEmotions = {
    "anger", "anticipation", "disgust", "fear",     "joy",   "love",
    "optimism", "pessimism", "sadness", "surprise", "trust"};

struct LabeledRecord {
  std::string id;
  std::string language;  // en, es, ar, or synthetic-<k>
  std::optional<std::string> text;
  std::vector<std::uint8_t> labels;
  Split split = Split::Train;

  bool operator==(const LabeledRecord&) const = default;
};

// SemEval 2018 Task E-c TSV: header "ID Tweet anger ... trust", one row per
// tweet with 0/1 emotion columns. Throws MalformedRow (with the 1-based line
// number) on a bad header, wrong column count, or a non-binary label.
std::vector<LabeledRecord> parse_dataset(const std::filesystem::path& path, std::string_view language,
                                         Split split = Split::Train);

// Loads every 2018-E-c-{En,Es,Ar}-{train,dev,test-gold}.txt present in dir.
std::vector<LabeledRecord> load_semeval_dir(const std::filesystem::path& dir);

// Generic record manifest used for synthetic corpora:
//   id <TAB> language <TAB> split <TAB> labels(e.g. 010011) [<TAB> text]
void write_manifest(const std::filesystem::path& path, const std::vector<LabeledRecord>& records);
std::vector<LabeledRecord> read_manifest(const std::filesystem::path& path);

std::vector<std::string> languages_of(const std::vector<LabeledRecord>& records);

}  // namespace mlvat
