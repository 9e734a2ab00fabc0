#include "sacode/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "sacode/csv.hpp"

namespace sacode {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool truthy(std::string_view raw) {
  const std::string v = lower(trim(raw));
  if (v.empty() || v == "0" || v == "false" || v == "no" || v == "n") return false;
  if (v == "1" || v == "true" || v == "yes" || v == "y" || v == "x") return true;
  throw IngestError("not a boolean flag: '" + std::string(raw) + "'");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool is_json_path(const std::filesystem::path& path) { return lower(path.extension().string()) == ".json"; }

}  // namespace

ColumnMapping ColumnMapping::canonical() {
  ColumnMapping m;
  m.coders = {{"C1", "c1_tag1", "c1_tag2", "c1_unfocused"}, {"C2", "c2_tag1", "c2_tag2", "c2_unfocused"}};
  m.code_aliases = {{"T\u2032", "T'"}};
  return m;
}

ColumnMapping ColumnMapping::from_json(const json& j) {
  ColumnMapping m;
  m.item_index = j.value("item_index", m.item_index);
  m.text = j.value("text", m.text);
  m.category = j.value("category", m.category);
  m.source = j.value("source", m.source);
  m.iot_flag = j.value("iot_flag", m.iot_flag);
  if (auto it = j.find("coders"); it != j.end()) {
    for (const auto& c : *it) {
      m.coders.push_back({c.at("id").get<std::string>(), c.at("tag1").get<std::string>(), c.value("tag2", ""),
                          c.value("unfocused", "")});
    }
  } else {
    m.coders = canonical().coders;
  }
  if (auto it = j.find("code_aliases"); it != j.end()) m.code_aliases = it->get<std::map<std::string, std::string>>();
  if (auto it = j.find("category_aliases"); it != j.end()) m.category_aliases = it->get<std::map<std::string, std::string>>();
  return m;
}

ColumnMapping ColumnMapping::load(const std::filesystem::path& path) {
  try {
    return from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw IngestError("mapping " + path.string() + ": " + e.what());
  }
}

json ColumnMapping::to_json() const {
  json coders_json = json::array();
  for (const auto& c : coders) {
    coders_json.push_back({{"id", c.id}, {"tag1", c.tag1}, {"tag2", c.tag2}, {"unfocused", c.unfocused}});
  }
  return json{{"item_index", item_index}, {"text", text},         {"category", category},
              {"source", source},         {"iot_flag", iot_flag}, {"coders", coders_json},
              {"code_aliases", code_aliases}, {"category_aliases", category_aliases}};
}

std::size_t Table::column(const std::string& name) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw IngestError("mapped column '" + name + "' is not in the input");
  return static_cast<std::size_t>(it - header.begin());
}

bool Table::has_column(const std::string& name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

Table parse_csv_table(std::string_view text) {
  std::vector<csv::Row> rows;
  try {
    rows = csv::parse(text);
  } catch (const std::runtime_error& e) {
    throw IngestError(e.what());
  }
  Table t;
  if (rows.empty()) throw IngestError("csv input has no header row");
  t.header = std::move(rows.front());
  for (auto& h : t.header) h = trim(h);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    auto& r = rows[i];
    if (r.size() == 1 && trim(r[0]).empty()) continue;  // blank line
    if (r.size() != t.header.size()) {
      throw IngestError("csv row " + std::to_string(i + 1) + " has " + std::to_string(r.size()) + " fields, header has " +
                        std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(r));
  }
  return t;
}

Table json_table(const json& doc) {
  if (!doc.is_array()) throw IngestError("json dataset must be an array of objects");
  Table t;
  std::set<std::string> seen;
  for (const auto& obj : doc) {
    if (!obj.is_object()) throw IngestError("json dataset entries must be objects");
    for (const auto& [k, v] : obj.items()) {
      if (seen.insert(k).second) t.header.push_back(k);
    }
  }
  for (const auto& obj : doc) {
    std::vector<std::string> row;
    for (const auto& name : t.header) {
      auto it = obj.find(name);
      if (it == obj.end() || it->is_null()) {
        row.emplace_back();
      } else if (it->is_string()) {
        row.push_back(it->get<std::string>());
      } else if (it->is_boolean()) {
        row.push_back(it->get<bool>() ? "1" : "");
      } else {
        row.push_back(it->dump());
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table load_table(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  if (is_json_path(path)) {
    try {
      return json_table(json::parse(text));
    } catch (const json::parse_error& e) {
      throw IngestError(path.string() + ": " + e.what());
    }
  }
  return parse_csv_table(text);
}

std::optional<std::string> normalize_category(std::string_view raw, const std::map<std::string, std::string>& aliases) {
  std::string v = trim(raw);
  if (v.empty()) return std::nullopt;
  if (auto it = aliases.find(v); it != aliases.end()) v = it->second;
  static const std::regex kPattern(R"(^(?:uk)?[-_ ]?0*([0-9]+)$)", std::regex::icase);
  std::smatch m;
  if (std::regex_match(v, m, kPattern)) {
    const int n = std::stoi(m[1].str());
    if (n >= 1 && n <= 13) return "UK-" + std::to_string(n);
  }
  throw IngestError("unknown category label '" + std::string(raw) + "'");
}

Dataset parse_dataset(const Table& table, const ColumnMapping& mapping) {
  const std::size_t ix_col = table.column(mapping.item_index);
  const auto text_col = mapping.text.empty() ? std::nullopt : std::optional(table.column(mapping.text));
  const auto cat_col = mapping.category.empty() ? std::nullopt : std::optional(table.column(mapping.category));
  const auto src_col = mapping.source.empty() ? std::nullopt : std::optional(table.column(mapping.source));

  Dataset items;
  std::set<int> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    AdviceItem item;
    const std::string ix = trim(row[ix_col]);
    try {
      std::size_t used = 0;
      item.index = std::stoi(ix, &used);
      if (used != ix.size()) throw std::invalid_argument(ix);
    } catch (const std::logic_error&) {
      throw IngestError("row " + std::to_string(r + 1) + ": item index '" + ix + "' is not an integer");
    }
    if (!seen.insert(item.index).second) throw IngestError("duplicate item index " + ix);
    if (text_col) item.text = row[*text_col];
    if (cat_col) item.category = normalize_category(row[*cat_col], mapping.category_aliases);
    if (src_col) item.source = row[*src_col];
    items.push_back(std::move(item));
  }
  return items;
}

Dataset parse_dataset(const std::filesystem::path& file, const ColumnMapping& mapping) {
  return parse_dataset(load_table(file), mapping);
}

std::vector<CoderRecordSet> parse_codings(const Table& table, const ColumnMapping& mapping, const CodingTree& tree) {
  if (mapping.coders.empty()) throw IngestError("mapping names no coder columns");
  const std::size_t ix_col = table.column(mapping.item_index);
  const auto iot_col = (!mapping.iot_flag.empty() && table.has_column(mapping.iot_flag))
                           ? std::optional(table.column(mapping.iot_flag))
                           : std::nullopt;

  auto resolve = [&](const std::string& cell, int item) {
    std::string raw = trim(cell);
    if (auto it = mapping.code_aliases.find(raw); it != mapping.code_aliases.end()) raw = it->second;
    if (!tree.has_code(raw)) throw IngestError("item " + std::to_string(item) + ": unknown code '" + trim(cell) + "'");
    return tree.canonical(raw);
  };
  auto split_codes = [](const std::string& cell) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : cell) {
      if (c == ';' || c == '|') {
        out.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    out.push_back(cur);
    std::erase_if(out, [](const std::string& s) { return trim(s).empty(); });
    return out;
  };

  std::vector<CoderRecordSet> sets;
  for (const auto& coder : mapping.coders) {
    const std::size_t t1 = table.column(coder.tag1);
    const auto t2 = coder.tag2.empty() ? std::nullopt : std::optional(table.column(coder.tag2));
    const auto uf = coder.unfocused.empty() ? std::nullopt : std::optional(table.column(coder.unfocused));

    CoderRecordSet set;
    set.coder_id = coder.id;
    for (const auto& row : table.rows) {
      TagRecord rec;
      rec.coder_id = coder.id;
      try {
        rec.item_index = std::stoi(trim(row[ix_col]));
      } catch (const std::logic_error&) {
        throw IngestError("item index '" + row[ix_col] + "' is not an integer");
      }
      std::vector<std::string> cells = split_codes(row[t1]);
      if (t2) {
        for (auto& c : split_codes(row[*t2])) cells.push_back(std::move(c));
      }
      if (cells.empty()) throw IngestError("item " + std::to_string(rec.item_index) + ": coder " + coder.id + " has no tag");
      if (cells.size() > 2) {
        throw IngestError("item " + std::to_string(rec.item_index) + ": coder " + coder.id + " has more than 2 tags");
      }
      for (const auto& cell : cells) {
        const std::string code = resolve(cell, rec.item_index);
        for (const auto& existing : rec.tags) {
          if (existing.code == code) {
            throw IngestError("item " + std::to_string(rec.item_index) + ": coder " + coder.id + " has tag " + code + " twice");
          }
        }
        rec.tags.push_back(Tag{code, tree.tag_to_sequence(code), {}});
      }
      if (uf && truthy(row[*uf])) {
        // Attach to the tag that offers the label; fall back to the first tag so
        // validate_records can report the stray flag.
        auto target = std::find_if(rec.tags.begin(), rec.tags.end(), [&](const Tag& t) {
          const auto& labels = tree.code(t.code).sublabels;
          return std::find(labels.begin(), labels.end(), kUnfocused) != labels.end();
        });
        (target == rec.tags.end() ? rec.tags.front() : *target).sublabels.insert(kUnfocused);
      }
      if (iot_col) rec.iot_specific = truthy(row[*iot_col]);
      set.records.push_back(std::move(rec));
    }
    std::sort(set.records.begin(), set.records.end(),
              [](const TagRecord& a, const TagRecord& b) { return a.item_index < b.item_index; });
    sets.push_back(std::move(set));
  }
  return sets;
}

std::vector<CoderRecordSet> parse_codings(const std::filesystem::path& file, const ColumnMapping& mapping,
                                          const CodingTree& tree) {
  return parse_codings(load_table(file), mapping, tree);
}

namespace {

bool replays_to(const CodingTree& tree, const QuestionSequence& seq, const std::string& code) {
  if (seq.nodes.size() != seq.answers.size() || seq.nodes.empty()) return false;
  if (seq.terminal_code != code) return false;
  if (!tree.is_raw_leaf(code)) {
    // Merged codes only exist in the analysis view.
    try {
      return tree.analysis_sequence(code) == seq;
    } catch (const std::out_of_range&) {
      return false;
    }
  }
  if (seq.nodes.front() != tree.root()) return false;
  for (std::size_t i = 0; i < seq.nodes.size(); ++i) {
    if (!tree.has_question(seq.nodes[i])) return false;
    const NodeRef& child = tree.step(seq.nodes[i], seq.answers[i]);
    const bool last = i + 1 == seq.nodes.size();
    if (last) return child.is_code() && child.id == code;
    if (!child.is_question() || child.id != seq.nodes[i + 1]) return false;
  }
  return false;
}

}  // namespace

ValidationReport validate_records(const std::vector<CoderRecordSet>& sets, const Dataset& dataset, const CodingTree& tree) {
  ValidationReport report;
  auto add = [&](std::string kind, std::string subject, std::string message) {
    report.push_back({std::move(kind), std::move(subject), std::move(message)});
  };
  std::set<int> items;
  for (const auto& item : dataset) items.insert(item.index);

  for (const auto& set : sets) {
    std::set<int> covered;
    for (const auto& rec : set.records) {
      const std::string where = set.coder_id + "/" + std::to_string(rec.item_index);
      if (!covered.insert(rec.item_index).second) add("duplicate record", where, "item coded more than once");
      if (!items.contains(rec.item_index)) add("unknown item", where, "record refers to an item not in the dataset");
      if (rec.tags.empty() || rec.tags.size() > 2) {
        add("tag count", where, std::to_string(rec.tags.size()) + " tags (expected 1 or 2)");
      }
      if (rec.tags.size() == 2 && tree.canonical(rec.tags[0].code) == tree.canonical(rec.tags[1].code)) {
        add("duplicate tag", where, "both tags are " + rec.tags[0].code);
      }
      for (const auto& tag : rec.tags) {
        if (!tree.has_code(tag.code)) {
          add("unknown code", where, "code " + tag.code + " is not in the tree");
          continue;
        }
        if (!replays_to(tree, tag.sequence, tag.code)) {
          add("sequence mismatch", where, "sequence does not replay to " + tag.code);
        }
        const auto& allowed = tree.code(tag.code).sublabels;
        const auto& canonical_allowed = tree.code(tree.canonical(tag.code)).sublabels;
        for (const auto& label : tag.sublabels) {
          const bool ok = std::find(allowed.begin(), allowed.end(), label) != allowed.end() ||
                          std::find(canonical_allowed.begin(), canonical_allowed.end(), label) != canonical_allowed.end();
          if (!ok) add("sublabel not allowed", where, "sublabel " + label + " on code " + tag.code);
        }
      }
    }
    for (int ix : items) {
      if (!covered.contains(ix)) add("missing item", set.coder_id + "/" + std::to_string(ix), "no record for item");
    }
  }
  return report;
}

namespace {

struct CoderCells {
  std::string tag1, tag2, unfocused;
};

CoderCells cells_for(const CoderRecordSet& set, int item_index) {
  CoderCells c;
  const TagRecord* rec = set.find(item_index);
  if (!rec) return c;
  if (!rec->tags.empty()) c.tag1 = rec->tags[0].code;
  if (rec->tags.size() > 1) c.tag2 = rec->tags[1].code;
  for (const auto& t : rec->tags) {
    if (t.has_sublabel(kUnfocused)) c.unfocused = "1";
  }
  return c;
}

bool iot_for(const CoderRecordSet& a, const CoderRecordSet& b, int item_index) {
  const TagRecord* ra = a.find(item_index);
  const TagRecord* rb = b.find(item_index);
  return (ra && ra->iot_specific) || (rb && rb->iot_specific);
}

}  // namespace

void write_canonical_csv(std::ostream& out, const Dataset& dataset, const CoderRecordSet& first, const CoderRecordSet& second) {
  csv::write_row(out, {"item_index", "text", "category", "c1_tag1", "c1_tag2", "c1_unfocused", "c2_tag1", "c2_tag2",
                       "c2_unfocused", "iot_flag"});
  for (const auto& item : dataset) {
    const CoderCells a = cells_for(first, item.index);
    const CoderCells b = cells_for(second, item.index);
    csv::write_row(out, {std::to_string(item.index), item.text, item.category.value_or(""), a.tag1, a.tag2, a.unfocused,
                         b.tag1, b.tag2, b.unfocused, iot_for(first, second, item.index) ? "1" : ""});
  }
}

json canonical_json(const Dataset& dataset, const CoderRecordSet& first, const CoderRecordSet& second) {
  json arr = json::array();
  auto opt = [](const std::string& s) { return s.empty() ? json(nullptr) : json(s); };
  for (const auto& item : dataset) {
    const CoderCells a = cells_for(first, item.index);
    const CoderCells b = cells_for(second, item.index);
    arr.push_back(json{{"item_index", item.index},
                       {"text", item.text},
                       {"category", item.category ? json(*item.category) : json(nullptr)},
                       {"c1_tag1", opt(a.tag1)},
                       {"c1_tag2", opt(a.tag2)},
                       {"c1_unfocused", !a.unfocused.empty()},
                       {"c2_tag1", opt(b.tag1)},
                       {"c2_tag2", opt(b.tag2)},
                       {"c2_unfocused", !b.unfocused.empty()},
                       {"iot_flag", iot_for(first, second, item.index)}});
  }
  return arr;
}

}  // namespace sacode
