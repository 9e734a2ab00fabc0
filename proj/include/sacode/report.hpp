#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sacode/agreement.hpp"
#include "sacode/tree.hpp"

namespace sacode {

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TableFormat { kText, kCsv, kMarkdown };

std::string extension(TableFormat f);
/// "txt" / "text", "csv", "md" / "markdown". Throws ReportError otherwise.
TableFormat table_format_from_string(std::string_view s);

struct Document {
  std::string name;  // relative path inside the report directory
  std::string content;
};

struct BundleMetadata {
  std::string tree_hash;
  std::string dataset_hash;
  std::string generated_at;  // ISO-8601 UTC
  bool merge_t_tprime = false;
};

/// UTC timestamp for report metadata. SOURCE_DATE_EPOCH wins when set, so
/// reruns can be byte-identical.
std::string report_timestamp();

/// Packs an engine result into the self-contained document every renderer reads.
nlohmann::json make_bundle(const Analysis& analysis, const CodingTree& tree, const BundleMetadata& meta);

/// Throws ReportError when a section a renderer needs is missing.
void check_bundle(const nlohmann::json& bundle);

std::vector<Document> render_tables(const nlohmann::json& bundle, TableFormat format);
std::vector<Document> render_figures(const nlohmann::json& bundle);

/// Heatmap band for a whole percentage: 0 for 0%, 1 ("A") for 1-5%, ... capped at 13 ("M").
int heat_band(int percent);
char band_letter(int band);
/// Grey level for a band; 255 (white) for band 0.
int band_grey(int band);

/// Writes tables/, figures/ and bundle.json under `dir`. Returns the written paths.
std::vector<std::filesystem::path> write_report(const std::filesystem::path& dir, const nlohmann::json& bundle,
                                                const std::vector<TableFormat>& formats);

}  // namespace sacode
