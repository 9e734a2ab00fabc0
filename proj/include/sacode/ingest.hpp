#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "sacode/records.hpp"
#include "sacode/tree.hpp"

namespace sacode {

class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CoderColumns {
  std::string id;
  std::string tag1;
  std::string tag2;
  std::string unfocused;  // empty: not mapped
};

/// Column-name -> semantic-field assignments for a two-coder (or N-coder) file.
/// The canonical layout is item_index, text, category, c1_tag1, c1_tag2,
/// c1_unfocused, c2_tag1, c2_tag2, c2_unfocused, iot_flag.
struct ColumnMapping {
  std::string item_index = "item_index";
  std::string text = "text";
  std::string category = "category";
  std::string source;
  std::string iot_flag = "iot_flag";
  std::vector<CoderColumns> coders;
  std::map<std::string, std::string> code_aliases;      // raw cell value -> code id
  std::map<std::string, std::string> category_aliases;  // raw cell value -> UK-n

  static ColumnMapping canonical();
  static ColumnMapping from_json(const nlohmann::json& j);
  static ColumnMapping load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

/// A header plus rows of string cells, read from CSV or from a JSON array of objects.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;  // throws IngestError
  bool has_column(const std::string& name) const;
};

Table parse_csv_table(std::string_view text);
Table json_table(const nlohmann::json& doc);
/// Reads `.json` files as JSON, everything else as CSV.
Table load_table(const std::filesystem::path& path);

/// Normalizes "UK-5", "uk5", "5", ... to "UK-5". Empty input yields nullopt.
std::optional<std::string> normalize_category(std::string_view raw, const std::map<std::string, std::string>& aliases = {});

Dataset parse_dataset(const Table& table, const ColumnMapping& mapping);
Dataset parse_dataset(const std::filesystem::path& file, const ColumnMapping& mapping);

/// One record set per mapped coder. Sequences are derived from the tree;
/// merge_map is applied so stored codes are canonical.
std::vector<CoderRecordSet> parse_codings(const Table& table, const ColumnMapping& mapping, const CodingTree& tree);
std::vector<CoderRecordSet> parse_codings(const std::filesystem::path& file, const ColumnMapping& mapping,
                                          const CodingTree& tree);

ValidationReport validate_records(const std::vector<CoderRecordSet>& sets, const Dataset& dataset, const CodingTree& tree);

/// Canonical wide CSV for a dataset coded by exactly two coders.
void write_canonical_csv(std::ostream& out, const Dataset& dataset, const CoderRecordSet& first, const CoderRecordSet& second);
/// JSON mirror of the canonical CSV: an array of objects with the same field names.
nlohmann::json canonical_json(const Dataset& dataset, const CoderRecordSet& first, const CoderRecordSet& second);

}  // namespace sacode
