#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "sacode/tree.hpp"

namespace sacode {

inline constexpr const char* kUnfocused = "Unfocused";

struct AdviceItem {
  int index = 0;
  std::string text;
  std::optional<std::string> category;  // UK-1 .. UK-13 when known
  std::string source;

  friend bool operator==(const AdviceItem&, const AdviceItem&) = default;
};

using Dataset = std::vector<AdviceItem>;

struct Tag {
  std::string code;
  QuestionSequence sequence;
  std::set<std::string> sublabels;

  bool has_sublabel(const std::string& label) const { return sublabels.contains(label); }
  friend bool operator==(const Tag&, const Tag&) = default;
};

/// One coder's coding of one advice item: one or two tags, first tag first.
/// Plain data; validate_records() checks the invariants for imported data,
/// sessions only ever construct valid records.
struct TagRecord {
  int item_index = 0;
  std::string coder_id;
  std::vector<Tag> tags;
  bool iot_specific = false;

  bool is_double() const { return tags.size() == 2; }
  friend bool operator==(const TagRecord&, const TagRecord&) = default;
};

struct CoderRecordSet {
  std::string coder_id;
  std::vector<TagRecord> records;  // ascending item_index
  bool complete = true;

  const TagRecord* find(int item_index) const;
  friend bool operator==(const CoderRecordSet&, const CoderRecordSet&) = default;
};

nlohmann::json to_json(const AdviceItem& item);
AdviceItem advice_item_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Tag& tag);
Tag tag_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TagRecord& rec);
TagRecord tag_record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CoderRecordSet& set);
CoderRecordSet record_set_from_json(const nlohmann::json& j);

CoderRecordSet load_record_set(const std::filesystem::path& path);
void save_record_set(const CoderRecordSet& set, const std::filesystem::path& path);

/// SHA-256 over the canonical JSON form of the dataset.
std::string dataset_hash(const Dataset& items);

}  // namespace sacode
