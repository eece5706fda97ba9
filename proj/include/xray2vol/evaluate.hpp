#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "xray2vol/dataset.hpp"
#include "xray2vol/metrics.hpp"
#include "xray2vol/render.hpp"

namespace xray2vol {

/// Canonical evaluation render: +z view of a view-aligned volume, iso 0.1, AO on,
/// resolution twice the volume's x/y size (at least 64).
RenderConfig canonical_render_config(const Dims3& dims);

struct EvalRow {
    std::string sample_id;
    std::string species;
    ViewBucket bucket = ViewBucket::other;
    double l2 = 0;
    double dssim = 0;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    std::vector<std::string> missing;  ///< validation samples without a method output
};

/// Compares method_dir/<id>.xvol against every validation sample's ground truth.
/// Missing outputs are listed and skipped.
EvalReport evaluate(const DatasetManifest& m, const std::filesystem::path& method_dir);
/// Same, for outputs already in memory (parallel to m.select(Split::validation)).
EvalReport evaluate(const DatasetManifest& m, const std::vector<Volume>& outputs);

/// CSV: sample_id,species,view_bucket,l2,dssim
void write_report_csv(const EvalReport& r, std::ostream& os);
/// Means with 95% intervals, histograms, per-view-bucket means.
void write_report_summary(const EvalReport& r, std::ostream& os);
void write_report(const EvalReport& r, const std::filesystem::path& out_dir);

struct DepthAblationRow {
    int level = 0;            ///< requested slice count
    int effective_level = 0;  ///< min(level, volume depth)
    MeanCi dssim;
    MeanCi l2;
};

/// Down/up-samples each validation ground truth along depth and compares canonical
/// renders against the original. Levels above the volume depth are clamped to it.
std::vector<DepthAblationRow> depth_ablation(const DatasetManifest& m, const std::vector<int>& levels);
void write_depth_ablation(const std::vector<DepthAblationRow>& rows, std::ostream& os);

}  // namespace xray2vol
