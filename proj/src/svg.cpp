// SVG figures for the report. Everything here reads numbers from the bundle;
// the only arithmetic is layout.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "sacode/report.hpp"

namespace sacode {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(1);
  o << v;
  std::string s = o.str();
  if (s.size() > 2 && s.compare(s.size() - 2, 2, ".0") == 0) s.resize(s.size() - 2);
  if (s == "-0") s = "0";
  return s;
}

std::string esc(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

class Svg {
 public:
  Svg(double w, double h) : w_(w), h_(h) {}

  void rect(double x, double y, double w, double h, const std::string& fill, const std::string& extra = "") {
    body_ << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\"" << fmt(w) << "\" height=\"" << fmt(h)
          << "\" fill=\"" << fill << "\"" << (extra.empty() ? "" : " " + extra) << "/>\n";
  }
  void line(double x1, double y1, double x2, double y2, const std::string& stroke = "#000", double width = 1) {
    body_ << "<line x1=\"" << fmt(x1) << "\" y1=\"" << fmt(y1) << "\" x2=\"" << fmt(x2) << "\" y2=\"" << fmt(y2)
          << "\" stroke=\"" << stroke << "\" stroke-width=\"" << fmt(width) << "\"/>\n";
  }
  void text(double x, double y, std::string_view s, const std::string& anchor = "middle", int size = 11,
            const std::string& fill = "#000", bool bold = false) {
    body_ << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" font-size=\"" << size << "\" text-anchor=\""
          << anchor << "\" fill=\"" << fill << "\"" << (bold ? " font-weight=\"bold\"" : "") << ">" << esc(s)
          << "</text>\n";
  }
  void raw(const std::string& s) { body_ << s; }

  std::string str() const {
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(w_) << "\" height=\"" << fmt(h_)
      << "\" viewBox=\"0 0 " << fmt(w_) << " " << fmt(h_) << "\" font-family=\"Helvetica, Arial, sans-serif\">\n";
    o << "<rect x=\"0\" y=\"0\" width=\"" << fmt(w_) << "\" height=\"" << fmt(h_) << "\" fill=\"#fff\"/>\n";
    o << body_.str() << "</svg>\n";
    return o.str();
  }

  double width() const { return w_; }

 private:
  double w_;
  double h_;
  std::ostringstream body_;
};

void banner(Svg& svg, double y, const std::string& msg) {
  svg.rect(20, y, svg.width() - 40, 26, "#fff3cd", "stroke=\"#b58900\"");
  svg.text(svg.width() / 2, y + 17, msg, "middle", 12, "#5c4400", true);
}

double nice_max(double v) {
  if (v <= 0) return 1;
  const double p = std::pow(10.0, std::floor(std::log10(v)));
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0}) {
    if (v <= m * p) return m * p;
  }
  return 10 * p;
}

struct BarPanel {
  std::string title;
  std::string y_label;
  std::vector<std::string> groups;
  std::vector<std::string> series;
  std::vector<std::vector<double>> values;        // [group][series]
  std::vector<std::vector<std::string>> labels;   // printed above each bar
  double x = 0;
  double y = 0;
  double width = 0;
  double height = 0;
};

const std::array<const char*, 3> kSeriesFill = {"#4d4d4d", "#a6a6a6", "#d9d9d9"};

void draw_panel(Svg& svg, const BarPanel& p) {
  const double left = p.x + 56;
  const double right = p.x + p.width - 10;
  const double top = p.y + 40;
  const double bottom = p.y + p.height - 40;
  svg.text((left + right) / 2, p.y + 18, p.title, "middle", 13, "#000", true);

  double vmax = 0;
  for (const auto& g : p.values) {
    for (double v : g) vmax = std::max(vmax, v);
  }
  const double ymax = nice_max(vmax);
  for (int i = 0; i <= 5; ++i) {
    const double v = ymax * i / 5;
    const double yy = bottom - (bottom - top) * i / 5;
    svg.line(left, yy, right, yy, i == 0 ? "#000" : "#e0e0e0");
    svg.text(left - 6, yy + 4, fmt(v), "end", 10);
  }
  svg.line(left, top, left, bottom);
  svg.raw("<text x=\"" + fmt(p.x + 14) + "\" y=\"" + fmt((top + bottom) / 2) +
          "\" font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 " + fmt(p.x + 14) + " " +
          fmt((top + bottom) / 2) + ")\">" + esc(p.y_label) + "</text>\n");

  const std::size_t ng = std::max<std::size_t>(p.groups.size(), 1);
  const double slot = (right - left) / static_cast<double>(ng);
  const double bar = std::min(28.0, slot * 0.8 / static_cast<double>(std::max<std::size_t>(p.series.size(), 1)));
  for (std::size_t g = 0; g < p.groups.size(); ++g) {
    const double cx = left + slot * (static_cast<double>(g) + 0.5);
    const double x0 = cx - bar * static_cast<double>(p.series.size()) / 2;
    for (std::size_t s = 0; s < p.series.size(); ++s) {
      const double v = p.values[g][s];
      const double h = (bottom - top) * v / ymax;
      const double bx = x0 + bar * static_cast<double>(s);
      svg.rect(bx, bottom - h, bar - 1, h, kSeriesFill[s % kSeriesFill.size()],
               "stroke=\"#000\" stroke-width=\"0.5\"");
      if (!p.labels.empty()) svg.text(bx + (bar - 1) / 2, bottom - h - 3, p.labels[g][s], "middle", 9);
    }
    svg.text(cx, bottom + 15, p.groups[g], "middle", 11);
  }
  // legend
  double lx = left;
  for (std::size_t s = 0; s < p.series.size(); ++s) {
    svg.rect(lx, p.y + p.height - 16, 10, 10, kSeriesFill[s % kSeriesFill.size()], "stroke=\"#000\" stroke-width=\"0.5\"");
    svg.text(lx + 14, p.y + p.height - 7, p.series[s], "start", 10);
    lx += 30 + 7.0 * static_cast<double>(p.series[s].size());
  }
}

bool dataset_empty(const json& b) { return b.at("summary").at("items").get<long long>() == 0; }

const char* kEmptyBanner = "No advice items: nothing to plot";

Document tag_distribution_figure(const json& b) {
  const json& d = b.at("distributions");
  const auto codes = d.at(0).at("codes").get<std::vector<std::string>>();
  const std::vector<std::string> coders = {d.at(0).at("coder_id").get<std::string>(),
                                           d.at(1).at("coder_id").get<std::string>()};
  std::map<std::string, bool> actionable;
  for (const auto& c : b.at("tree").at("codes")) actionable[c.at("id").get<std::string>()] = c.at("actionable").get<bool>();

  BarPanel codes_panel;
  codes_panel.title = "Tags per code";
  codes_panel.y_label = "Tags";
  codes_panel.series = coders;
  for (const auto& code : codes) {
    codes_panel.groups.push_back(actionable[code] ? code + "*" : code);
    std::vector<double> v;
    std::vector<std::string> l;
    for (int k = 0; k < 2; ++k) {
      const long long n = d.at(k).at("counts").at(code).get<long long>();
      v.push_back(static_cast<double>(n));
      l.push_back(std::to_string(n));
    }
    codes_panel.values.push_back(v);
    codes_panel.labels.push_back(l);
  }
  BarPanel act_panel;
  act_panel.title = "Items by actionability";
  act_panel.y_label = "Items";
  act_panel.series = coders;
  for (const auto& [key, label] : std::vector<std::pair<const char*, const char*>>{
           {"actionable_items", "Actionable"}, {"non_actionable_items", "Non-actionable"}}) {
    act_panel.groups.push_back(label);
    std::vector<double> v;
    std::vector<std::string> l;
    for (int k = 0; k < 2; ++k) {
      const long long n = d.at(k).at(key).get<long long>();
      v.push_back(static_cast<double>(n));
      l.push_back(std::to_string(n));
    }
    act_panel.values.push_back(v);
    act_panel.labels.push_back(l);
  }
  const double w1 = 70 + 62.0 * static_cast<double>(codes.size());
  Svg svg(w1 + 260, 340);
  codes_panel.x = 0;
  codes_panel.y = 10;
  codes_panel.width = w1;
  codes_panel.height = 320;
  act_panel.x = w1;
  act_panel.y = 10;
  act_panel.width = 250;
  act_panel.height = 320;
  draw_panel(svg, codes_panel);
  draw_panel(svg, act_panel);
  if (dataset_empty(b)) banner(svg, 150, kEmptyBanner);
  return {"figures/tag_distribution.svg", svg.str()};
}

Document q_figure(const json& b, bool within) {
  const json& t = b.at("q_tally");
  BarPanel p;
  p.title = within ? "Q-nonagreements relative to joint visits" : "Q-nonagreement distribution across questions";
  p.y_label = within ? "% of joint visits" : "% of Q-nonagreements";
  p.series = {"SS", "SD"};
  for (const auto& q : t.at("questions")) {
    p.groups.push_back(q.at("question").get<std::string>());
    std::vector<double> v;
    std::vector<std::string> l;
    for (const char* type : {"SS", "SD"}) {
      const json& c = q.at(type);
      v.push_back(c.at(within ? "within" : "share").get<double>());
      l.push_back(c.at("q_nonagreements").get<long long>() == 0
                      ? ""
                      : std::to_string(c.at(within ? "within_percent" : "share_percent").get<int>()) + "%");
    }
    p.values.push_back(v);
    p.labels.push_back(l);
  }
  const double w = 90 + 64.0 * static_cast<double>(p.groups.size());
  Svg svg(w, 360);
  p.x = 0;
  p.y = 10;
  p.width = w;
  p.height = 330;
  draw_panel(svg, p);
  svg.text(w - 12, 28,
           "Totals: SS " + std::to_string(t.at("totals").at("SS").get<long long>()) + ", SD " +
               std::to_string(t.at("totals").at("SD").get<long long>()),
           "end", 10);
  if (dataset_empty(b)) banner(svg, 160, kEmptyBanner);
  return {within ? "figures/q_nonagreement_within.svg" : "figures/q_nonagreement_share.svg", svg.str()};
}

Document unfocused_figure(const json& b) {
  const json& u = b.at("unfocused");
  BarPanel p;
  p.title = "Sub-label " + u.at("label").get<std::string>() + " when both coders reached " + u.at("code").get<std::string>();
  p.y_label = "Items";
  p.series = {"SS", "SD"};
  for (const auto& [key, label] : std::vector<std::pair<const char*, const char*>>{
           {"both", "Both chose it"}, {"exactly_one", "Exactly one"}, {"neither", "Neither"}}) {
    p.groups.push_back(label);
    std::vector<double> v;
    std::vector<std::string> l;
    for (const char* type : {"SS", "SD"}) {
      const long long n = u.at(key).at(type).get<long long>();
      v.push_back(static_cast<double>(n));
      l.push_back(std::to_string(n));
    }
    p.values.push_back(v);
    p.labels.push_back(l);
  }
  Svg svg(460, 340);
  p.x = 0;
  p.y = 10;
  p.width = 460;
  p.height = 320;
  draw_panel(svg, p);
  svg.text(448, 28, "Total " + std::to_string(u.at("total").get<long long>()), "end", 10);
  if (dataset_empty(b)) banner(svg, 150, kEmptyBanner);
  return {"figures/unfocused.svg", svg.str()};
}

Document tree_figure(const json& b) {
  const json& tree = b.at("tree");
  std::map<std::string, std::pair<std::string, std::string>> children;  // question -> (yes, no) refs
  for (const auto& q : tree.at("questions")) {
    children[q.at("id").get<std::string>()] = {q.at("yes").get<std::string>(), q.at("no").get<std::string>()};
  }
  std::map<std::string, const json*> counts;
  for (const auto& q : b.at("q_tally").at("questions")) counts[q.at("question").get<std::string>()] = &q;

  struct Pos {
    double x;
    int depth;
  };
  std::map<std::string, Pos> pos;  // keyed by the child reference string
  int next_leaf = 0;
  int max_depth = 0;
  std::function<double(const std::string&, int)> place = [&](const std::string& ref, int depth) -> double {
    max_depth = std::max(max_depth, depth);
    const auto parsed = NodeRef::parse(ref);
    double x;
    if (parsed && parsed->is_question()) {
      const auto& [yes, no] = children.at(parsed->id);
      const double xn = place(no, depth + 1);
      const double xy = place(yes, depth + 1);
      x = (xn + xy) / 2;
    } else {
      x = next_leaf++;
    }
    pos[ref] = {x, depth};
    return x;
  };
  const std::string root_ref = NodeRef{NodeRef::Kind::kQuestion, tree.at("root").get<std::string>()}.str();
  place(root_ref, 0);

  const double slot = 132;
  const double row = 96;
  const double margin = 80;
  Svg svg(margin * 2 + slot * std::max(next_leaf - 1, 0), 110 + row * max_depth + 60);
  auto px = [&](const Pos& p) { return margin + slot * p.x; };
  auto py = [&](const Pos& p) { return 70 + row * p.depth; };
  svg.text(svg.width() / 2, 22, "Q-agreements at each question (yes and no answers)", "middle", 14, "#000", true);
  svg.text(svg.width() / 2, 40, "Each node: Q-agreements (Y yes / N no) of joint visits, by comparison type", "middle", 10);

  for (const auto& [ref, p] : pos) {
    const auto parsed = NodeRef::parse(ref);
    if (!parsed || !parsed->is_question()) continue;
    const auto& [yes, no] = children.at(parsed->id);
    for (const auto& [child, letter] : {std::pair{yes, "Y"}, std::pair{no, "N"}}) {
      const Pos& c = pos.at(child);
      svg.line(px(p), py(p) + 24, px(c), py(c) - (NodeRef::parse(child)->is_question() ? 24 : 12), "#555");
      svg.text((px(p) + px(c)) / 2 + (px(c) < px(p) ? -8 : 8), (py(p) + 24 + py(c) - 18) / 2, letter, "middle", 10, "#555");
    }
  }
  std::map<std::string, bool> actionable;
  for (const auto& c : tree.at("codes")) actionable[c.at("id").get<std::string>()] = c.at("actionable").get<bool>();
  for (const auto& [ref, p] : pos) {
    const auto parsed = NodeRef::parse(ref);
    if (parsed->is_question()) {
      svg.rect(px(p) - 60, py(p) - 24, 120, 48, "#f2f2f2", "stroke=\"#000\" rx=\"6\"");
      svg.text(px(p), py(p) - 9, parsed->id, "middle", 12, "#000", true);
      int line = 0;
      for (const char* type : {"SS", "SD"}) {
        const json& c = counts.count(parsed->id) ? counts.at(parsed->id)->at(type) : json::object();
        auto get = [&](const char* k) { return c.contains(k) ? c.at(k).get<long long>() : 0LL; };
        svg.text(px(p), py(p) + 5 + 12 * line++,
                 std::string(type) + " " + std::to_string(get("q_agreements")) + " (Y" +
                     std::to_string(get("yes_agreements")) + " N" + std::to_string(get("no_agreements")) + ") /" +
                     std::to_string(get("visits")),
                 "middle", 9);
      }
    } else {
      const bool act = actionable[parsed->id];
      svg.rect(px(p) - 22, py(p) - 12, 44, 24, act ? "#333" : "#fff", "stroke=\"#000\"");
      svg.text(px(p), py(p) + 4, parsed->id, "middle", 11, act ? "#fff" : "#000", true);
    }
  }
  if (dataset_empty(b)) banner(svg, 46, kEmptyBanner);
  return {"figures/agreement_tree.svg", svg.str()};
}

Document category_figure(const json& b) {
  const json& c = b.at("categories");
  const auto cats = c.at("categories").get<std::vector<std::string>>();
  struct Row {
    std::string label;
    std::string coder;
    const json* values;
  };
  std::vector<Row> rows;
  for (const auto& code : c.at("codes")) {
    for (const auto& coder : c.at("coders")) {
      rows.push_back({code.get<std::string>(), coder.at("coder_id").get<std::string>(),
                      &coder.at("percent").at(code.get<std::string>())});
    }
  }
  for (const auto& coder : c.at("coders")) {
    rows.push_back({"Actionable", coder.at("coder_id").get<std::string>(), &coder.at("actionable_percent")});
  }
  rows.push_back({"Delta", "", &c.at("actionability_delta")});

  const double cell_w = 52;
  const double cell_h = 20;
  const double left = 130;
  const double top = 74;
  Svg svg(left + cell_w * static_cast<double>(std::max<std::size_t>(cats.size(), 4)) + 20,
          top + cell_h * static_cast<double>(rows.size()) + 30);
  svg.text(svg.width() / 2, 22, "Share of each category's items carrying each code", "middle", 13, "#000", true);
  for (std::size_t j = 0; j < cats.size(); ++j) {
    const double x = left + cell_w * (static_cast<double>(j) + 0.5);
    svg.text(x, top - 22, cats[j], "middle", 10, "#000", true);
    svg.text(x, top - 8, "n=" + std::to_string(c.at("sizes").at(cats[j]).get<long long>()), "middle", 9);
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double y = top + cell_h * static_cast<double>(i);
    if (i == 0 || rows[i].label != rows[i - 1].label) svg.text(8, y + 14, rows[i].label, "start", 10, "#000", true);
    svg.text(left - 8, y + 14, rows[i].coder, "end", 10);
    for (std::size_t j = 0; j < cats.size(); ++j) {
      const int p = rows[i].values->at(cats[j]).get<int>();
      const int grey = band_grey(heat_band(p));
      std::ostringstream fill;
      fill << "rgb(" << grey << "," << grey << "," << grey << ")";
      const double x = left + cell_w * static_cast<double>(j);
      svg.rect(x, y, cell_w, cell_h, fill.str(), "stroke=\"#fff\"");
      svg.text(x + cell_w / 2, y + 14, std::to_string(p) + "%", "middle", 10, grey <= 120 ? "#fff" : "#000");
    }
  }
  if (cats.empty()) banner(svg, top, dataset_empty(b) ? kEmptyBanner : "No categorized items");
  return {"figures/category_heatmap.svg", svg.str()};
}

}  // namespace

std::vector<Document> render_figures(const json& bundle) {
  check_bundle(bundle);
  return {tag_distribution_figure(bundle), q_figure(bundle, false), q_figure(bundle, true), unfocused_figure(bundle),
          tree_figure(bundle), category_figure(bundle)};
}

}  // namespace sacode
