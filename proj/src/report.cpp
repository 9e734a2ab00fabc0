#include "sacode/report.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "sacode/csv.hpp"
#include "sacode/session.hpp"

namespace sacode {

using nlohmann::json;

std::string extension(TableFormat f) {
  switch (f) {
    case TableFormat::kText: return "txt";
    case TableFormat::kCsv: return "csv";
    case TableFormat::kMarkdown: return "md";
  }
  return "txt";
}

TableFormat table_format_from_string(std::string_view s) {
  if (s == "txt" || s == "text") return TableFormat::kText;
  if (s == "csv") return TableFormat::kCsv;
  if (s == "md" || s == "markdown") return TableFormat::kMarkdown;
  throw ReportError("unsupported table format '" + std::string(s) + "' (expected txt, csv or md)");
}

std::string report_timestamp() {
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) {
    char* end = nullptr;
    const long long secs = std::strtoll(epoch, &end, 10);
    if (end && *end == '\0') return utc_timestamp(std::chrono::system_clock::time_point(std::chrono::seconds(secs)));
  }
  return utc_timestamp();
}

int heat_band(int percent) {
  if (percent <= 0) return 0;
  return std::min(13, (percent - 1) / 5 + 1);
}

char band_letter(int band) { return band <= 0 ? ' ' : static_cast<char>('A' + std::min(band, 13) - 1); }

int band_grey(int band) { return band <= 0 ? 255 : 200 - 10 * (std::min(band, 13) - 1); }

namespace {

json tree_section(const CodingTree& tree) {
  json questions = json::array();
  for (const auto& id : tree.analysis_questions()) {
    const QuestionNode& q = tree.question(id);
    questions.push_back(json{{"id", id},
                             {"text", q.text},
                             {"yes", tree.analysis_child(id, Answer::kYes).str()},
                             {"no", tree.analysis_child(id, Answer::kNo).str()}});
  }
  json codes = json::array();
  for (const auto& id : tree.analysis_codes()) {
    const Code& c = tree.code(id);
    codes.push_back(json{{"id", id}, {"display_name", c.display_name}, {"actionable", c.actionable}});
  }
  return json{{"root", tree.root()}, {"questions", questions}, {"codes", codes}};
}

}  // namespace

json make_bundle(const Analysis& analysis, const CodingTree& tree, const BundleMetadata& meta) {
  json b = to_json(analysis);
  b["metadata"] = json{{"tree_hash", meta.tree_hash.empty() ? tree.hash() : meta.tree_hash},
                       {"dataset_hash", meta.dataset_hash},
                       {"coder_ids", {analysis.coder_a, analysis.coder_b}},
                       {"generated_at", meta.generated_at.empty() ? report_timestamp() : meta.generated_at},
                       {"merge_t_tprime", meta.merge_t_tprime || tree.treat_t_tprime_as_equal()}};
  b["tree"] = tree_section(tree);
  return b;
}

void check_bundle(const json& bundle) {
  static const char* kSections[] = {"metadata", "summary",    "distributions", "q_tally", "tag_vs_tag",
                                    "categories", "unfocused", "dd",           "tree"};
  if (!bundle.is_object()) throw ReportError("report bundle must be a JSON object");
  for (const char* s : kSections) {
    if (!bundle.contains(s)) throw ReportError(std::string("report bundle has no '") + s + "' section");
  }
}

namespace {

struct Grid {
  std::string name;
  std::string title;
  std::vector<std::vector<std::string>> header;  // one or more header rows
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> notes;
  std::string placeholder;  // printed instead of the table when there are no rows
};

std::size_t display_width(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

std::string pad(const std::string& s, std::size_t width, bool left) {
  const std::size_t w = display_width(s);
  if (w >= width) return s;
  return left ? s + std::string(width - w, ' ') : std::string(width - w, ' ') + s;
}

std::string render_text(const Grid& g) {
  std::ostringstream out;
  out << g.title << "\n\n";
  if (g.rows.empty() && !g.placeholder.empty()) {
    out << g.placeholder << "\n";
  } else {
    std::vector<std::size_t> widths;
    auto measure = [&](const std::vector<std::string>& row) {
      if (widths.size() < row.size()) widths.resize(row.size(), 0);
      for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], display_width(row[i]));
    };
    for (const auto& r : g.header) measure(r);
    for (const auto& r : g.rows) measure(r);
    auto line = [&](const std::vector<std::string>& row) {
      std::string s;
      for (std::size_t i = 0; i < widths.size(); ++i) {
        if (i) s += "  ";
        s += pad(i < row.size() ? row[i] : "", widths[i], i == 0);
      }
      while (!s.empty() && s.back() == ' ') s.pop_back();
      out << s << "\n";
    };
    for (const auto& r : g.header) line(r);
    std::size_t total = 0;
    for (auto w : widths) total += w;
    out << std::string(total + 2 * (widths.empty() ? 0 : widths.size() - 1), '-') << "\n";
    for (const auto& r : g.rows) line(r);
  }
  for (const auto& n : g.notes) out << "\n" << n << "\n";
  return out.str();
}

std::string render_csv(const Grid& g) {
  std::ostringstream out;
  for (const auto& r : g.header) csv::write_row(out, r);
  if (g.rows.empty() && !g.placeholder.empty()) csv::write_row(out, {g.placeholder});
  for (const auto& r : g.rows) csv::write_row(out, r);
  return out.str();
}

std::string md_cell(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c;
  }
  return out.empty() ? " " : out;
}

std::string render_markdown(const Grid& g) {
  std::ostringstream out;
  out << "## " << g.title << "\n\n";
  if (g.rows.empty() && !g.placeholder.empty()) {
    out << "_" << g.placeholder << "_\n";
  } else {
    std::size_t cols = 0;
    for (const auto& r : g.header) cols = std::max(cols, r.size());
    for (const auto& r : g.rows) cols = std::max(cols, r.size());
    auto line = [&](const std::vector<std::string>& row) {
      out << "|";
      for (std::size_t i = 0; i < cols; ++i) out << " " << md_cell(i < row.size() ? row[i] : "") << " |";
      out << "\n";
    };
    // Markdown has one header row; extra header rows become bold body rows.
    line(g.header.empty() ? std::vector<std::string>(cols) : g.header.front());
    out << "|";
    for (std::size_t i = 0; i < cols; ++i) out << (i == 0 ? " :--- |" : " ---: |");
    out << "\n";
    for (std::size_t h = 1; h < g.header.size(); ++h) {
      std::vector<std::string> bold;
      for (const auto& c : g.header[h]) bold.push_back(c.empty() ? c : "**" + c + "**");
      line(bold);
    }
    for (const auto& r : g.rows) line(r);
  }
  for (const auto& n : g.notes) out << "\n" << n << "\n";
  return out.str();
}

std::string num(const json& v) { return std::to_string(v.get<long long>()); }
std::string dash_or(const json& v) { return v.get<long long>() == 0 ? "--" : num(v); }
std::string pct(const json& v) { return num(v) + "%"; }

std::vector<std::string> coder_ids(const json& b) {
  return b.at("metadata").at("coder_ids").get<std::vector<std::string>>();
}

Grid summary_grid(const json& b) {
  const json& s = b.at("summary");
  Grid g;
  g.name = "summary";
  g.title = "T-agreements and actionability agreements by comparison type";
  g.header = {{"Type", "Items (of " + num(s.at("items")) + ")", "T-agreements", "Actionability agreements"}};
  for (const char* t : {"SS", "SD", "DD"}) {
    const json& r = s.at("types").at(t);
    const std::string n = num(r.at("items"));
    g.rows.push_back({t, n + " (" + pct(r.at("items_percent")) + ")",
                      num(r.at("t_agreements")) + " (" + pct(r.at("t_agreements_percent")) + " of " + n + ")",
                      num(r.at("actionability_agreements")) + " (" + pct(r.at("actionability_agreements_percent")) +
                          " of " + n + ")"});
  }
  g.rows.push_back({"All", num(s.at("items")),
                    num(s.at("t_agreements")) + " (" + pct(s.at("t_agreement_percent")) + " of " + num(s.at("items")) + ")",
                    num(s.at("actionability_agreements"))});
  if (s.at("anomalies").get<long long>() > 0) {
    g.notes.push_back(num(s.at("anomalies")) + " item(s) had tied overlaps and carry no diverging question.");
  }
  return g;
}

Grid pairing_grid(const json& b) {
  const json& s = b.at("summary");
  Grid g;
  g.name = "pairing";
  g.title = "T-agreements by ordered tag pairing (First-Second includes Second-First)";
  g.header = {{"Type", "T-agreements", "First-First", "First-Second", "Second-Second"}};
  for (const char* t : {"SS", "SD", "DD"}) {
    const json& r = s.at("types").at(t);
    std::vector<std::string> row = {t, num(r.at("t_agreements"))};
    for (const char* p : {"First-First", "First-Second", "Second-Second"}) {
      const json& n = r.at("pairing").at(p);
      row.push_back(n.get<long long>() == 0 ? "--" : num(n) + " (" + pct(r.at("pairing_percent").at(p)) + ")");
    }
    g.rows.push_back(std::move(row));
  }
  return g;
}

Grid dd_grid(const json& b) {
  const auto ids = coder_ids(b);
  Grid g;
  g.name = "dd_items";
  g.title = "Tags of items where both coders gave two tags";
  g.placeholder = "no DD items";
  const json& dd = b.at("dd");
  if (dd.empty()) return g;
  std::vector<std::string> header = {"Coder tag"};
  for (const auto& r : dd) header.push_back(num(r.at("item_index")));
  g.header = {header};
  const std::array<std::pair<const char*, std::size_t>, 2> sides = {{{"a", 0}, {"b", 1}}};
  for (const auto& [key, coder] : sides) {
    for (std::size_t pos = 0; pos < 2; ++pos) {
      std::vector<std::string> row = {ids[coder] + "_" + std::to_string(pos + 1)};
      for (const auto& r : dd) row.push_back(r.at(key).at(pos).get<std::string>());
      g.rows.push_back(std::move(row));
    }
  }
  return g;
}

Grid distribution_grid(const json& b) {
  const json& d = b.at("distributions");
  const json& a = d.at(0);
  const json& c = d.at(1);
  Grid g;
  g.name = "tag_distribution";
  g.title = "Tag counts per coder";
  g.header = {{"Code", a.at("coder_id").get<std::string>(), "%", c.at("coder_id").get<std::string>(), "%"}};
  for (const auto& code : a.at("codes")) {
    const std::string k = code.get<std::string>();
    g.rows.push_back({k, num(a.at("counts").at(k)), pct(a.at("percent_of_items").at(k)), num(c.at("counts").at(k)),
                      pct(c.at("percent_of_items").at(k))});
  }
  g.rows.push_back({"Total tags", num(a.at("total_tags")), "", num(c.at("total_tags")), ""});
  g.rows.push_back({"Second tags", num(a.at("second_tags")), "", num(c.at("second_tags")), ""});
  g.rows.push_back({"Actionable items", num(a.at("actionable_items")), pct(a.at("actionable_percent")),
                    num(c.at("actionable_items")), pct(c.at("actionable_percent"))});
  g.rows.push_back({"Non-actionable items", num(a.at("non_actionable_items")), "", num(c.at("non_actionable_items")), ""});
  g.notes.push_back("Percentages are of " + num(a.at("items")) + " items.");
  return g;
}

Grid q_tally_grid(const json& b) {
  const json& t = b.at("q_tally");
  Grid g;
  g.name = "q_tally";
  g.title = "Q-agreements and Q-nonagreements per question";
  g.header = {{"", "SS", "", "", "", "", "SD", "", "", "", ""},
              {"Question", "Visits", "Q-agr (Y/N)", "Q-nonagr", "Share", "Within", "Visits", "Q-agr (Y/N)", "Q-nonagr",
               "Share", "Within"}};
  for (const auto& q : t.at("questions")) {
    std::vector<std::string> row = {q.at("question").get<std::string>()};
    for (const char* type : {"SS", "SD"}) {
      const json& c = q.at(type);
      row.push_back(num(c.at("visits")));
      row.push_back(num(c.at("q_agreements")) + " (" + num(c.at("yes_agreements")) + "/" + num(c.at("no_agreements")) + ")");
      row.push_back(num(c.at("q_nonagreements")));
      row.push_back(pct(c.at("share_percent")));
      row.push_back(pct(c.at("within_percent")));
    }
    g.rows.push_back(std::move(row));
  }
  g.rows.push_back({"Total", "", "", num(t.at("totals").at("SS")), "", "", "", "", num(t.at("totals").at("SD")), "", ""});
  for (const char* type : {"SS", "SD"}) {
    if (t.at("excluded_anomalies").at(type).get<long long>() > 0) {
      g.notes.push_back(num(t.at("excluded_anomalies").at(type)) + " " + type +
                        " item(s) with tied overlaps were left out.");
    }
  }
  return g;
}

Grid matrix_grid(const json& b, const char* type) {
  const json& m = b.at("tag_vs_tag").at(type);
  const auto ids = coder_ids(b);
  const auto codes = m.at("codes").get<std::vector<std::string>>();
  Grid g;
  g.name = std::string("tag_vs_tag_") + (type[1] == 'S' ? "ss" : "sd");
  g.title = std::string("Tag-vs-tag ") + type + " nonagreements (rows " + ids[0] + ", columns " + ids[1] + ")";
  std::vector<std::string> header = {ids[0] + " \\ " + ids[1]};
  header.insert(header.end(), codes.begin(), codes.end());
  header.push_back("Sum");
  g.header = {header};
  for (std::size_t i = 0; i < codes.size(); ++i) {
    std::vector<std::string> row = {codes[i]};
    for (std::size_t j = 0; j < codes.size(); ++j) {
      row.push_back(i == j ? "*" : dash_or(m.at("counts").at(i).at(j)));
    }
    row.push_back(num(m.at("row_sums").at(i)));
    g.rows.push_back(std::move(row));
  }
  std::vector<std::string> sums = {"Sum"};
  for (const auto& v : m.at("column_sums")) sums.push_back(num(v));
  sums.push_back(num(m.at("total")));
  g.rows.push_back(std::move(sums));
  g.notes.push_back("-- is 0; * marks agreement cells. Total " + num(m.at("total")) + ".");
  return g;
}

std::string shaded(const json& v, bool with_band) {
  const int p = v.get<int>();
  const int band = heat_band(p);
  std::string s = std::to_string(p) + "%";
  if (with_band && band > 0) s += std::string(" ") + band_letter(band);
  return s;
}

Grid category_grid(const json& b, bool csv) {
  const json& c = b.at("categories");
  const auto cats = c.at("categories").get<std::vector<std::string>>();
  Grid g;
  g.name = "categories";
  g.title = "Share of each category's items carrying each code";
  g.placeholder = "no categorized items";
  std::vector<std::string> header = {"Code", "Coder"};
  if (csv) header.push_back("Measure");
  header.insert(header.end(), cats.begin(), cats.end());
  std::vector<std::string> sizes = {"Items", ""};
  if (csv) sizes.push_back("");
  for (const auto& cat : cats) sizes.push_back(num(c.at("sizes").at(cat)));
  g.header = {header, sizes};
  if (cats.empty()) {
    g.header.clear();
    return g;
  }

  auto add = [&](const std::string& label, const std::string& coder, const json& values) {
    if (csv) {
      std::vector<std::string> pr = {label, coder, "percent"};
      std::vector<std::string> br = {label, coder, "band"};
      for (const auto& cat : cats) {
        pr.push_back(num(values.at(cat)));
        br.push_back(std::string(1, band_letter(heat_band(values.at(cat).get<int>()))));
        if (br.back() == " ") br.back().clear();
      }
      g.rows.push_back(std::move(pr));
      g.rows.push_back(std::move(br));
    } else {
      std::vector<std::string> row = {label, coder};
      for (const auto& cat : cats) row.push_back(shaded(values.at(cat), true));
      g.rows.push_back(std::move(row));
    }
  };
  for (const auto& code : c.at("codes")) {
    for (const auto& coder : c.at("coders")) {
      add(code.get<std::string>(), coder.at("coder_id").get<std::string>(), coder.at("percent").at(code.get<std::string>()));
    }
  }
  for (const auto& coder : c.at("coders")) add("Actionable", coder.at("coder_id").get<std::string>(), coder.at("actionable_percent"));
  add("Actionability delta", "", c.at("actionability_delta"));
  g.notes.push_back("Letters give the shading band: A is 1-5%, B is 6-10%, and so on up to M.");
  if (c.at("uncategorized").get<long long>() > 0) {
    g.notes.push_back(num(c.at("uncategorized")) + " item(s) have no category and are not counted.");
  }
  return g;
}

Grid unfocused_grid(const json& b) {
  const json& u = b.at("unfocused");
  Grid g;
  g.name = "unfocused";
  g.title = "Sub-label " + u.at("label").get<std::string>() + " on agreed " + u.at("code").get<std::string>() + " items";
  g.header = {{"Coders choosing the label", "SS", "SD", "Total"}};
  for (const auto& [key, label] : std::vector<std::pair<const char*, const char*>>{
           {"both", "Both"}, {"exactly_one", "Exactly one"}, {"neither", "Neither"}}) {
    const json& r = u.at(key);
    g.rows.push_back({label, num(r.at("SS")), num(r.at("SD")),
                      std::to_string(r.at("SS").get<long long>() + r.at("SD").get<long long>())});
  }
  g.rows.push_back({"Total", "", "", num(u.at("total"))});
  return g;
}

}  // namespace

std::vector<Document> render_tables(const json& bundle, TableFormat format) {
  check_bundle(bundle);
  const bool csv = format == TableFormat::kCsv;
  const std::vector<Grid> grids = {summary_grid(bundle),      pairing_grid(bundle),  dd_grid(bundle),
                                   distribution_grid(bundle), q_tally_grid(bundle),  matrix_grid(bundle, "SS"),
                                   matrix_grid(bundle, "SD"), category_grid(bundle, csv), unfocused_grid(bundle)};
  std::vector<Document> docs;
  for (const auto& g : grids) {
    std::string body;
    switch (format) {
      case TableFormat::kText: body = render_text(g); break;
      case TableFormat::kCsv: body = render_csv(g); break;
      case TableFormat::kMarkdown: body = render_markdown(g); break;
    }
    docs.push_back({"tables/" + g.name + "." + extension(format), std::move(body)});
  }
  return docs;
}

std::vector<std::filesystem::path> write_report(const std::filesystem::path& dir, const json& bundle,
                                                const std::vector<TableFormat>& formats) {
  check_bundle(bundle);
  std::vector<Document> docs;
  for (TableFormat f : formats) {
    auto t = render_tables(bundle, f);
    docs.insert(docs.end(), std::make_move_iterator(t.begin()), std::make_move_iterator(t.end()));
  }
  auto figs = render_figures(bundle);
  docs.insert(docs.end(), std::make_move_iterator(figs.begin()), std::make_move_iterator(figs.end()));
  docs.push_back({"bundle.json", bundle.dump(2) + "\n"});

  std::vector<std::filesystem::path> written;
  for (const auto& d : docs) {
    const auto path = dir / d.name;
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ReportError("cannot write " + path.string());
    out << d.content;
    written.push_back(path);
  }
  return written;
}

}  // namespace sacode
