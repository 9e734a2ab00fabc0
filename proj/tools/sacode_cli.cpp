#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "sacode/agreement.hpp"
#include "sacode/ingest.hpp"
#include "sacode/report.hpp"
#include "sacode/service.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sacode;

namespace {

CodingTree load_tree(const std::string& path, bool merge) {
  CodingTree t = path.empty() ? CodingTree::default_tree() : CodingTree::load(path);
  return merge ? t.with_t_tprime_equal(true) : t;
}

ColumnMapping load_mapping(const std::string& path) {
  return path.empty() ? ColumnMapping::canonical() : ColumnMapping::load(path);
}

std::vector<TableFormat> parse_formats(const std::string& spec) {
  std::vector<TableFormat> out;
  std::stringstream ss(spec);
  std::string f;
  while (std::getline(ss, f, ',')) {
    if (!f.empty()) out.push_back(table_format_from_string(f));
  }
  if (out.empty()) throw ReportError("no table format given");
  return out;
}

void print_findings(const ValidationReport& findings) {
  for (const auto& f : findings) std::cerr << "  " << f.kind << " [" << f.subject << "]: " << f.message << "\n";
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

int validate_tree_cmd(const std::string& path, bool as_json) {
  json doc;
  try {
    std::ifstream in(path);
    if (!in) throw TreeError("cannot open " + path);
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    std::cerr << path << ": not valid JSON: " << e.what() << "\n";
    return 1;
  }
  ValidationReport findings;
  try {
    findings = validate_tree(parse_tree_spec(doc));
  } catch (const TreeError& e) {
    findings = e.findings();
    if (findings.empty()) findings.push_back({"schema", path, e.what()});
  }
  if (as_json) {
    json arr = json::array();
    for (const auto& f : findings) arr.push_back({{"kind", f.kind}, {"subject", f.subject}, {"message", f.message}});
    std::cout << json{{"valid", findings.empty()}, {"findings", arr}}.dump(2) << "\n";
  } else if (findings.empty()) {
    const CodingTree tree = CodingTree::build(parse_tree_spec(doc));
    std::cout << path << ": ok (" << tree.spec().questions.size() << " questions, " << tree.spec().codes.size()
              << " codes, hash " << tree.hash() << ")\n";
  } else {
    std::cerr << path << ": " << findings.size() << " finding(s)\n";
    print_findings(findings);
  }
  return findings.empty() ? 0 : 1;
}

struct Inputs {
  Dataset dataset;
  std::vector<CoderRecordSet> sets;
};

Inputs read_inputs(const std::string& dataset, const ColumnMapping& mapping, const CodingTree& tree, bool need_codings) {
  Inputs in;
  const Table table = load_table(dataset);
  in.dataset = parse_dataset(table, mapping);
  if (need_codings) in.sets = parse_codings(table, mapping, tree);
  return in;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coding-tree sessions and two-coder agreement analysis"};
  app.require_subcommand(1);

  std::string tree_path, dataset_path, mapping_path, out_dir, format = "txt,csv,md";
  bool merge = false;

  auto* vt = app.add_subcommand("validate-tree", "Check a tree config and list every finding");
  std::string vt_file;
  bool vt_json = false;
  vt->add_option("file", vt_file, "tree config")->required();
  vt->add_flag("--json", vt_json, "print findings as JSON");

  auto* ingest = app.add_subcommand("ingest", "Map a coded dataset onto canonical columns and validate it");
  ingest->add_option("--dataset", dataset_path, "CSV or JSON dataset")->required();
  ingest->add_option("--mapping", mapping_path, "column mapping JSON");
  ingest->add_option("--tree", tree_path, "tree config (default: built-in)");
  ingest->add_option("--out", out_dir, "output directory")->required();

  auto* analyze_cmd = app.add_subcommand("analyze", "Compare two coders and write the report");
  std::string set_a, set_b, coder_a, coder_b;
  analyze_cmd->add_option("--dataset", dataset_path, "CSV or JSON dataset")->required();
  analyze_cmd->add_option("--mapping", mapping_path, "column mapping JSON");
  analyze_cmd->add_option("--tree", tree_path, "tree config (default: built-in)");
  analyze_cmd->add_option("--out", out_dir, "report directory");
  analyze_cmd->add_option("--format", format, "table formats, comma separated (txt,csv,md)");
  analyze_cmd->add_flag("--merge-t-tprime", merge, "count T and T' as the same code");
  analyze_cmd->add_option("--set-a", set_a, "record set JSON for the first coder (instead of dataset columns)");
  analyze_cmd->add_option("--set-b", set_b, "record set JSON for the second coder");
  analyze_cmd->add_option("--coder-a", coder_a, "coder id from the mapping (default: first)");
  analyze_cmd->add_option("--coder-b", coder_b, "coder id from the mapping (default: second)");

  auto* report_cmd = app.add_subcommand("report", "Render tables and figures from a bundle.json");
  std::string bundle_path;
  report_cmd->add_option("--bundle", bundle_path, "bundle.json written by analyze")->required();
  report_cmd->add_option("--out", out_dir, "report directory")->required();
  report_cmd->add_option("--format", format, "table formats, comma separated (txt,csv,md)");

  auto* serve_cmd = app.add_subcommand("serve", "Run the local HTTP API");
  ServiceConfig cfg;
  std::string state_dir = "sessions", records_dir, token, host = "127.0.0.1";
  int port = 8080;
  serve_cmd->add_option("--dataset", dataset_path, "CSV or JSON dataset")->required();
  serve_cmd->add_option("--mapping", mapping_path, "column mapping JSON");
  serve_cmd->add_option("--tree", tree_path, "tree config (default: built-in)");
  serve_cmd->add_option("--port", port, "TCP port");
  serve_cmd->add_option("--host", host, "bind address");
  serve_cmd->add_option("--state-dir", state_dir, "where sessions are persisted");
  serve_cmd->add_option("--records-dir", records_dir, "extra record sets for /analyze");
  serve_cmd->add_option("--token", token, "require this bearer token");
  serve_cmd->add_flag("--merge-t-tprime", merge, "count T and T' as the same code");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*vt) return validate_tree_cmd(vt_file, vt_json);

    if (*ingest) {
      const CodingTree tree = load_tree(tree_path, false);
      const ColumnMapping mapping = load_mapping(mapping_path);
      const Inputs in = read_inputs(dataset_path, mapping, tree, true);
      const ValidationReport findings = validate_records(in.sets, in.dataset, tree);
      if (!findings.empty()) {
        std::cerr << dataset_path << ": " << findings.size() << " finding(s)\n";
        print_findings(findings);
        return 1;
      }
      const fs::path out(out_dir);
      json items = json::array();
      for (const auto& item : in.dataset) items.push_back(to_json(item));
      write_file(out / "dataset.json", items.dump(2) + "\n");
      for (const auto& set : in.sets) save_record_set(set, out / "records" / (set.coder_id + ".json"));
      if (in.sets.size() == 2) {
        std::ostringstream csv;
        write_canonical_csv(csv, in.dataset, in.sets[0], in.sets[1]);
        write_file(out / "canonical.csv", csv.str());
        write_file(out / "canonical.json", canonical_json(in.dataset, in.sets[0], in.sets[1]).dump(2) + "\n");
      }
      std::cout << in.dataset.size() << " items, " << in.sets.size() << " coder(s), dataset hash "
                << dataset_hash(in.dataset) << "\n";
      return 0;
    }

    if (*analyze_cmd) {
      const CodingTree tree = load_tree(tree_path, merge);
      const ColumnMapping mapping = load_mapping(mapping_path);
      const bool from_files = !set_a.empty() || !set_b.empty();
      if (from_files && (set_a.empty() || set_b.empty())) throw std::invalid_argument("--set-a and --set-b go together");
      Inputs in = read_inputs(dataset_path, mapping, tree, !from_files);
      CoderRecordSet a, b;
      if (from_files) {
        a = load_record_set(set_a);
        b = load_record_set(set_b);
      } else {
        auto pick = [&](const std::string& id, std::size_t fallback) -> const CoderRecordSet& {
          if (id.empty()) {
            if (in.sets.size() <= fallback) throw std::invalid_argument("the mapping names fewer than two coders");
            return in.sets[fallback];
          }
          for (const auto& s : in.sets) {
            if (s.coder_id == id) return s;
          }
          throw std::invalid_argument("no coder '" + id + "' in the mapping");
        };
        a = pick(coder_a, 0);
        b = pick(coder_b, 1);
      }
      const ValidationReport findings = validate_records({a, b}, in.dataset, tree);
      if (!findings.empty()) {
        std::cerr << "record validation failed: " << findings.size() << " finding(s)\n";
        print_findings(findings);
        return 1;
      }
      const Analysis analysis = analyze(a, b, in.dataset, tree);
      BundleMetadata meta;
      meta.dataset_hash = dataset_hash(in.dataset);
      meta.merge_t_tprime = merge;
      const json bundle = make_bundle(analysis, tree, meta);
      for (const auto& w : analysis.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << render_tables(bundle, TableFormat::kText).front().content;
      if (!out_dir.empty()) {
        const auto files = write_report(out_dir, bundle, parse_formats(format));
        std::cout << "\nwrote " << files.size() << " files under " << out_dir << "\n";
      }
      return 0;
    }

    if (*report_cmd) {
      std::ifstream in(bundle_path);
      if (!in) throw std::runtime_error("cannot open " + bundle_path);
      const json bundle = json::parse(in);
      const auto files = write_report(out_dir, bundle, parse_formats(format));
      std::cout << "wrote " << files.size() << " files under " << out_dir << "\n";
      return 0;
    }

    if (*serve_cmd) {
      cfg.tree = tree_path;
      cfg.dataset = dataset_path;
      cfg.mapping = mapping_path;
      cfg.state_dir = state_dir;
      cfg.records_dir = records_dir;
      cfg.token = token;
      cfg.host = host;
      cfg.port = port;
      cfg.merge_t_tprime = merge;
      static Service* running = nullptr;
      Service service(cfg);
      running = &service;
      std::signal(SIGINT, [](int) {
        if (running) running->stop();
      });
      std::signal(SIGTERM, [](int) {
        if (running) running->stop();
      });
      std::cout << "listening on http://" << host << ":" << port << "\n" << std::flush;
      service.serve();
      return 0;
    }
  } catch (const TreeError& e) {
    std::cerr << "tree error: " << e.what() << "\n";
    print_findings(e.findings());
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
