#include "mlvat/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "mlvat/error.hpp"

namespace mlvat {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

[[noreturn]] void malformed(const std::filesystem::path& path, std::size_t line_no, const std::string& why) {
  throw Error(Errc::MalformedRow, path.string() + ":" + std::to_string(line_no) + ": " + why);
}

std::uint8_t parse_bit(const std::string& field, const std::filesystem::path& path, std::size_t line_no) {
  if (field == "0") return 0;
  if (field == "1") return 1;
  malformed(path, line_no, "label value '" + field + "' is not 0 or 1");
}

std::ifstream open_text(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::NotFound, "cannot open " + path.string());
  return is;
}

}  // namespace

std::string_view split_name(Split s) noexcept {
  switch (s) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "dev") return Split::Dev;
  if (name == "test") return Split::Test;
  throw Error(Errc::InvalidConfig, "unknown split '" + std::string(name) + "'");
}

std::vector<LabeledRecord> parse_dataset(const std::filesystem::path& path, std::string_view language,
                                         Split split) {
  std::ifstream is = open_text(path);
  constexpr std::size_t kColumns = 2 + kSemEvalLabels;

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(is, line)) malformed(path, 1, "missing header row");
  ++line_no;
  strip_cr(line);
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_tabs(line);
  if (header.size() != kColumns || lower(header[0]) != "id" || lower(header[1]) != "tweet") {
    malformed(path, line_no, "header must be ID, Tweet, then the 11 emotion columns");
  }
  for (std::size_t k = 0; k < kSemEvalLabels; ++k) {
    if (lower(header[2 + k]) != kSemEvalEmotions[k]) {
      malformed(path, line_no, "expected emotion column '" + std::string(kSemEvalEmotions[k]) + "', got '" +
                                   header[2 + k] + "'");
    }
  }

  std::vector<LabeledRecord> records;
  while (std::getline(is, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != kColumns) {
      malformed(path, line_no, "expected " + std::to_string(kColumns) + " columns, got " +
                                   std::to_string(fields.size()));
    }
    LabeledRecord rec;
    rec.id = fields[0];
    rec.language = std::string(language);
    rec.text = fields[1];
    rec.split = split;
    rec.labels.reserve(kSemEvalLabels);
    for (std::size_t k = 0; k < kSemEvalLabels; ++k) rec.labels.push_back(parse_bit(fields[2 + k], path, line_no));
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<LabeledRecord> load_semeval_dir(const std::filesystem::path& dir) {
  struct Lang {
    const char* code;
    const char* tag;
  };
  struct Part {
    const char* suffix;
    Split split;
  };
  static constexpr Lang kLangs[] = {{"en", "En"}, {"es", "Es"}, {"ar", "Ar"}};
  static constexpr Part kParts[] = {{"train", Split::Train}, {"dev", Split::Dev}, {"test-gold", Split::Test}};

  std::vector<LabeledRecord> all;
  for (const Lang& lang : kLangs) {
    for (const Part& part : kParts) {
      const auto path = dir / ("2018-E-c-" + std::string(lang.tag) + "-" + part.suffix + ".txt");
      if (!std::filesystem::exists(path)) continue;
      auto recs = parse_dataset(path, lang.code, part.split);
      all.insert(all.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
    }
  }
  if (all.empty()) throw Error(Errc::NotFound, "no SemEval 2018 E-c files found in " + dir.string());
  return all;
}

void write_manifest(const std::filesystem::path& path, const std::vector<LabeledRecord>& records) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error(Errc::Io, "cannot open " + path.string() + " for writing");
  os << "id\tlanguage\tsplit\tlabels\ttext\n";
  for (const auto& r : records) {
    os << r.id << '\t' << r.language << '\t' << split_name(r.split) << '\t';
    for (auto b : r.labels) os << (b ? '1' : '0');
    os << '\t' << r.text.value_or("") << '\n';
  }
  if (!os) throw Error(Errc::Io, "write failed for " + path.string());
}

std::vector<LabeledRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream is = open_text(path);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(is, line)) malformed(path, 1, "missing header row");
  ++line_no;
  strip_cr(line);
  const auto header = split_tabs(line);
  if (header.size() < 4 || header[0] != "id" || header[1] != "language" || header[2] != "split" ||
      header[3] != "labels") {
    malformed(path, line_no, "header must start with id, language, split, labels");
  }
  std::vector<LabeledRecord> records;
  std::size_t n_labels = 0;
  while (std::getline(is, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 4 && fields.size() != 5) {
      malformed(path, line_no, "expected 4 or 5 columns, got " + std::to_string(fields.size()));
    }
    LabeledRecord rec;
    rec.id = fields[0];
    rec.language = fields[1];
    try {
      rec.split = parse_split(fields[2]);
    } catch (const Error&) {
      malformed(path, line_no, "unknown split '" + fields[2] + "'");
    }
    for (char c : fields[3]) rec.labels.push_back(parse_bit(std::string(1, c), path, line_no));
    if (rec.labels.empty()) malformed(path, line_no, "empty label vector");
    if (n_labels == 0) n_labels = rec.labels.size();
    if (rec.labels.size() != n_labels) malformed(path, line_no, "label count differs from earlier rows");
    if (fields.size() == 5 && !fields[4].empty()) rec.text = fields[4];
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<std::string> languages_of(const std::vector<LabeledRecord>& records) {
  std::vector<std::string> langs;
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (seen.insert(r.language).second) langs.push_back(r.language);
  }
  return langs;
}

}  // namespace mlvat
