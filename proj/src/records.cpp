#include "sacode/records.hpp"

#include <algorithm>
#include <fstream>

#include "sacode/hash.hpp"

namespace sacode {

using nlohmann::json;

const TagRecord* CoderRecordSet::find(int item_index) const {
  auto it = std::lower_bound(records.begin(), records.end(), item_index,
                             [](const TagRecord& r, int ix) { return r.item_index < ix; });
  if (it != records.end() && it->item_index == item_index) return &*it;
  // Unsorted input (hand-built sets in tests) falls back to a scan.
  for (const auto& r : records) {
    if (r.item_index == item_index) return &r;
  }
  return nullptr;
}

json to_json(const AdviceItem& item) {
  return json{{"item_index", item.index},
              {"text", item.text},
              {"category", item.category ? json(*item.category) : json(nullptr)},
              {"source", item.source}};
}

AdviceItem advice_item_from_json(const json& j) {
  AdviceItem item;
  item.index = j.at("item_index").get<int>();
  item.text = j.value("text", "");
  if (auto it = j.find("category"); it != j.end() && !it->is_null()) item.category = it->get<std::string>();
  item.source = j.value("source", "");
  return item;
}

json to_json(const Tag& tag) {
  return json{{"code", tag.code}, {"sequence", to_json(tag.sequence)}, {"sublabels", tag.sublabels}};
}

Tag tag_from_json(const json& j) {
  Tag tag;
  tag.code = j.at("code").get<std::string>();
  tag.sequence = sequence_from_json(j.at("sequence"));
  if (auto it = j.find("sublabels"); it != j.end()) tag.sublabels = it->get<std::set<std::string>>();
  return tag;
}

json to_json(const TagRecord& rec) {
  json tags = json::array();
  for (const auto& t : rec.tags) tags.push_back(to_json(t));
  return json{{"item_index", rec.item_index}, {"coder_id", rec.coder_id}, {"tags", tags}, {"iot_specific", rec.iot_specific}};
}

TagRecord tag_record_from_json(const json& j) {
  TagRecord rec;
  rec.item_index = j.at("item_index").get<int>();
  rec.coder_id = j.value("coder_id", "");
  for (const auto& t : j.at("tags")) rec.tags.push_back(tag_from_json(t));
  rec.iot_specific = j.value("iot_specific", false);
  return rec;
}

json to_json(const CoderRecordSet& set) {
  json records = json::array();
  for (const auto& r : set.records) records.push_back(to_json(r));
  return json{{"coder_id", set.coder_id}, {"complete", set.complete}, {"records", records}};
}

CoderRecordSet record_set_from_json(const json& j) {
  CoderRecordSet set;
  set.coder_id = j.at("coder_id").get<std::string>();
  set.complete = j.value("complete", true);
  for (const auto& r : j.at("records")) set.records.push_back(tag_record_from_json(r));
  return set;
}

CoderRecordSet load_record_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open record file " + path.string());
  return record_set_from_json(json::parse(in));
}

void save_record_set(const CoderRecordSet& set, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write record file " + path.string());
  out << to_json(set).dump(2) << '\n';
}

std::string dataset_hash(const Dataset& items) {
  json arr = json::array();
  for (const auto& item : items) arr.push_back(to_json(item));
  return sha256_hex(arr.dump());
}

}  // namespace sacode
