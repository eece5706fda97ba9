#include "xray2vol/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>

#include "xray2vol/error.hpp"

namespace xray2vol {

RenderConfig canonical_render_config(const Dims3& dims) {
    RenderConfig cfg;
    cfg.iso_value = 0.1;
    cfg.pose = ViewPose{};
    cfg.width = std::max(64, 2 * dims.nx);
    cfg.height = std::max(64, 2 * dims.ny);
    return cfg;
}

namespace {

EvalRow compare(const Sample& s, const Volume& gt, const Volume& out) {
    if (gt.dims() != out.dims())
        throw InvalidInput("output for " + s.id + " has dims that differ from the ground truth");
    const RenderConfig rc = canonical_render_config(gt.dims());
    return {s.id, s.species_id, classify_view(s.pose), volume_l2(gt, out), dssim(render_iso(gt, rc), render_iso(out, rc))};
}

}  // namespace

EvalReport evaluate(const DatasetManifest& m, const std::filesystem::path& method_dir) {
    EvalReport r;
    for (const Sample* s : m.select(Split::validation)) {
        auto path = method_dir / (s->id + ".xvol");
        if (!std::filesystem::exists(path)) {
            r.missing.push_back(s->id);
            continue;
        }
        r.rows.push_back(compare(*s, load_volume(m.resolve(s->volume_path)), load_volume(path)));
    }
    if (!r.missing.empty())
        std::cerr << "warning: " << r.missing.size() << " validation sample(s) have no output in " << method_dir.string() << '\n';
    return r;
}

EvalReport evaluate(const DatasetManifest& m, const std::vector<Volume>& outputs) {
    auto val = m.select(Split::validation);
    if (outputs.size() != val.size()) throw InvalidInput("evaluate: need one output per validation sample");
    EvalReport r;
    for (std::size_t i = 0; i < val.size(); ++i)
        r.rows.push_back(compare(*val[i], load_volume(m.resolve(val[i]->volume_path)), outputs[i]));
    return r;
}

void write_report_csv(const EvalReport& r, std::ostream& os) {
    os << "sample_id,species,view_bucket,l2,dssim\n";
    os << std::setprecision(9);
    for (const EvalRow& row : r.rows)
        os << row.sample_id << ',' << row.species << ',' << to_string(row.bucket) << ',' << row.l2 << ',' << row.dssim << '\n';
}

namespace {

void histogram(std::ostream& os, const std::string& name, const std::vector<double>& xs) {
    if (xs.empty()) return;
    constexpr int kBins = 10;
    const double hi = std::max(*std::max_element(xs.begin(), xs.end()), 1e-12);
    std::vector<int> bins(kBins, 0);
    for (double x : xs) ++bins[std::min(kBins - 1, static_cast<int>(x / hi * kBins))];
    os << name << " histogram (bin width " << hi / kBins << ")\n";
    for (int b = 0; b < kBins; ++b)
        os << "  [" << std::setw(9) << b * hi / kBins << ", " << std::setw(9) << (b + 1) * hi / kBins << ") "
           << std::setw(5) << bins[b] << ' ' << std::string(static_cast<std::size_t>(bins[b] * 40 / std::max<std::size_t>(1, xs.size())), '#')
           << '\n';
}

}  // namespace

void write_report_summary(const EvalReport& r, std::ostream& os) {
    std::vector<double> l2, ds;
    std::map<ViewBucket, std::pair<std::vector<double>, std::vector<double>>> buckets;
    for (const EvalRow& row : r.rows) {
        l2.push_back(row.l2);
        ds.push_back(row.dssim);
        buckets[row.bucket].first.push_back(row.l2);
        buckets[row.bucket].second.push_back(row.dssim);
    }
    auto l2ci = mean_ci95(l2), dsci = mean_ci95(ds);
    os << std::setprecision(6);
    os << "samples evaluated: " << r.rows.size() << '\n';
    os << "samples missing:   " << r.missing.size() << '\n';
    for (const auto& id : r.missing) os << "  missing " << id << '\n';
    os << "mean l2:    " << l2ci.mean << " +/- " << l2ci.half_width << " (95% CI)\n";
    os << "mean dssim: " << dsci.mean << " +/- " << dsci.half_width << " (95% CI)\n";
    os << "\nview bucket    n        l2     dssim\n";
    for (ViewBucket b : {ViewBucket::top, ViewBucket::front, ViewBucket::side, ViewBucket::other}) {
        auto it = buckets.find(b);
        if (it == buckets.end()) {
            os << std::left << std::setw(10) << to_string(b) << std::right << std::setw(5) << 0 << "         -         -\n";
            continue;
        }
        os << std::left << std::setw(10) << to_string(b) << std::right << std::setw(5) << it->second.first.size()
           << std::setw(10) << mean_ci95(it->second.first).mean << std::setw(10) << mean_ci95(it->second.second).mean << '\n';
    }
    os << '\n';
    histogram(os, "l2", l2);
    histogram(os, "dssim", ds);
}

void write_report(const EvalReport& r, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::ofstream csv(out_dir / "report.csv");
    write_report_csv(r, csv);
    std::ofstream txt(out_dir / "summary.txt");
    write_report_summary(r, txt);
    if (!csv || !txt) throw std::runtime_error("failed writing report to " + out_dir.string());
}

std::vector<DepthAblationRow> depth_ablation(const DatasetManifest& m, const std::vector<int>& levels) {
    std::vector<DepthAblationRow> rows(levels.size());
    std::vector<std::vector<double>> ds(levels.size()), l2(levels.size());
    for (const Sample* s : m.select(Split::validation)) {
        Volume gt = load_volume(m.resolve(s->volume_path));
        const RenderConfig rc = canonical_render_config(gt.dims());
        Image reference = render_iso(gt, rc);
        for (std::size_t k = 0; k < levels.size(); ++k) {
            if (levels[k] < 1) throw InvalidInput("depth_ablation: levels must be >= 1");
            int effective = std::min(levels[k], gt.dims().nz);
            Volume rt = depth_resample_roundtrip(gt, effective);
            ds[k].push_back(dssim(reference, render_iso(rt, rc)));
            l2[k].push_back(volume_l2(gt, rt));
            rows[k].level = levels[k];
            rows[k].effective_level = effective;
        }
    }
    for (std::size_t k = 0; k < levels.size(); ++k) {
        rows[k].level = levels[k];
        rows[k].dssim = mean_ci95(ds[k]);
        rows[k].l2 = mean_ci95(l2[k]);
    }
    return rows;
}

void write_depth_ablation(const std::vector<DepthAblationRow>& rows, std::ostream& os) {
    os << "level,effective_level,n,mean_dssim,dssim_ci95,mean_l2,l2_ci95\n" << std::setprecision(9);
    for (const auto& r : rows)
        os << r.level << ',' << r.effective_level << ',' << r.dssim.n << ',' << r.dssim.mean << ',' << r.dssim.half_width << ','
           << r.l2.mean << ',' << r.l2.half_width << '\n';
}

}  // namespace xray2vol
