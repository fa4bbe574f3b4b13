#include "climpanel/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "climpanel/aggregation.hpp"
#include "climpanel/csv.hpp"
#include "climpanel/errors.hpp"
#include "climpanel/io.hpp"
#include "climpanel/selection.hpp"

namespace climpanel {

namespace fs = std::filesystem;

namespace {

std::vector<fs::path> path_list(const std::string& value, const fs::path& base) {
    std::vector<fs::path> out;
    for (auto part : csv::split(value)) {
        if (part.empty()) continue;
        out.push_back(base / fs::path(std::string(part)));
    }
    return out;
}

long config_integer(const std::map<std::string, std::string>& kv, const std::string& key, long fallback) {
    const auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
        return csv::parse_long(it->second);
    } catch (const Error&) {
        fail(ErrorKind::config_error, fmt::format("{} needs an integer, got '{}'", key, it->second));
    }
}

bool config_flag(const std::map<std::string, std::string>& kv, const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) return false;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    fail(ErrorKind::config_error, fmt::format("{} needs true or false, got '{}'", key, it->second));
}

}  // namespace

PipelineConfig PipelineConfig::read(const fs::path& path) {
    auto kv = io::read_key_values(path);
    const auto base = path.parent_path();
    PipelineConfig c;
    const auto take = [&](const std::string& key, bool required) -> std::string {
        const auto it = kv.find(key);
        if (it == kv.end()) {
            if (required) fail(ErrorKind::config_error, fmt::format("{}: missing key '{}'", path.string(), key));
            return {};
        }
        auto v = it->second;
        kv.erase(it);
        return v;
    };
    const auto one = [&](const std::string& key) { return base / fs::path(take(key, true)); };
    c.grid = path_list(take("grid", false), base);
    c.weights = path_list(take("weights", false), base);
    if (c.grid.empty() != c.weights.empty()) fail(ErrorKind::config_error, "grid and weights must be given together");
    c.panel = one("panel");
    c.spec = one("spec");
    if (const auto cand = take("candidates", false); !cand.empty()) c.candidates = base / cand;
    c.climate = one("climate");
    c.growth = one("growth");
    c.shares = one("shares");
    c.output = one("output");
    for (auto item : csv::split(take("variants", false))) {
        if (item.empty()) continue;
        const auto colon = item.find(':');
        if (colon == std::string_view::npos) fail(ErrorKind::config_error, "variants entries are name:spec_file");
        c.variants.emplace_back(std::string(item.substr(0, colon)), base / std::string(item.substr(colon + 1)));
    }
    for (auto part : csv::split(take("scenarios", false))) {
        if (!part.empty()) c.scenarios.emplace_back(part);
    }
    const auto rest = kv;
    if (!rest.contains("seed")) fail(ErrorKind::config_error, path.string() + ": missing key 'seed'");
    c.draws = static_cast<int>(config_integer(rest, "draws", c.draws));
    c.seed = static_cast<std::uint64_t>(config_integer(rest, "seed", 0));
    c.projection.bias_correction = config_flag(rest, "bias_correction");
    c.projection.regime_switching = config_flag(rest, "regime_switching");
    for (const auto& [k, _] : rest) {
        if (k != "draws" && k != "seed" && k != "bias_correction" && k != "regime_switching") {
            fail(ErrorKind::config_error, fmt::format("{}: unknown key '{}'", path.string(), k));
        }
    }
    if (c.draws < 0) fail(ErrorKind::config_error, "draws must be non-negative");
    return c;
}

PanelDataset merge_regressors(const PanelDataset& panel, std::span<const weather::AnnualRegressorSet> rows,
                              const weather::RegressorSchema& schema) {
    const auto names = schema.column_names();
    std::map<std::pair<std::string, int>, const weather::AnnualRegressorSet*> by_key;
    for (const auto& r : rows) by_key[{r.province_id, r.year}] = &r;
    auto out = panel;
    std::vector<std::vector<double>> columns(names.size(),
                                             std::vector<double>(panel.rows(), std::numeric_limits<double>::quiet_NaN()));
    for (std::size_t i = 0; i < panel.rows(); ++i) {
        const auto it = by_key.find({panel.province(i), panel.year(i)});
        if (it == by_key.end()) continue;
        const auto v = it->second->values();
        for (std::size_t k = 0; k < names.size(); ++k) columns[k][i] = v[k];
    }
    for (std::size_t k = 0; k < names.size(); ++k) out.set_column(names[k], std::move(columns[k]));
    return out;
}

std::vector<weather::ProvinceYear> aggregation_requests(const PanelDataset& panel, const weather::GridSet& grids,
                                                        const weather::WeightMap& weights) {
    std::vector<weather::ProvinceYear> req;
    for (std::size_t p = 0; p < panel.province_count(); ++p) {
        const auto& id = panel.province_ids()[p];
        const auto years = weather::covered_years(id, grids, weights);
        const std::set<int> covered(years.begin(), years.end());
        for (std::size_t r : panel.rows_of(static_cast<int>(p))) {
            if (covered.contains(panel.year(r))) req.push_back({id, panel.year(r)});
        }
    }
    return req;
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io_error, "cannot open " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    std::string hex;
    for (unsigned i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

std::vector<GrowthScenario> growth_scenarios(const PanelDataset& data, const fs::path& growth_file,
                                             std::vector<std::string> names, const ProjectionOptions& options) {
    const auto paths = io::read_growth_paths(growth_file);
    if (names.empty()) {
        names.emplace_back("baseline");
        for (const auto& p : paths) names.push_back(p.name);
    }
    std::vector<GrowthScenario> out;
    std::optional<Linkage> linkage;
    for (const auto& n : names) {
        if (n == "baseline") {
            out.push_back(GrowthScenario::baseline(data, options.baseline_window));
            continue;
        }
        const auto it = std::find_if(paths.begin(), paths.end(), [&](const SspPath& p) { return p.name == n; });
        if (it == paths.end()) fail(ErrorKind::config_error, "growth scenario '" + n + "' is not in " + growth_file.string());
        if (!linkage) linkage = estimate_linkage(data, options.baseline_window);
        out.push_back(GrowthScenario::ssp(*it, *linkage));
    }
    return out;
}

namespace {

// Runs one stage, tagging any failure with the stage name.
template <typename Fn>
auto stage(const char* name, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        fail(e.kind(), fmt::format("stage '{}': {}", name, e.detail()));
    } catch (const fs::filesystem_error& e) {
        fail(ErrorKind::io_error, fmt::format("stage '{}': {}", name, e.what()));
    }
}

void require_exists(const fs::path& p, bool directory) {
    const bool ok = directory ? fs::is_directory(p) : fs::is_regular_file(p);
    if (!ok) fail(ErrorKind::config_error, fmt::format("{} {} does not exist", directory ? "directory" : "file", p.string()));
}

}  // namespace

bool run_pipeline(const PipelineConfig& c) {
    stage("config", [&] {
        for (const auto& p : c.grid) require_exists(p, false);
        for (const auto& p : c.weights) require_exists(p, false);
        for (const auto& p : {c.panel, c.spec, c.growth, c.shares}) require_exists(p, false);
        if (c.candidates) require_exists(*c.candidates, false);
        for (const auto& [_, p] : c.variants) require_exists(p, false);
        require_exists(c.climate, true);
    });
    fs::create_directories(c.output);
    nlohmann::ordered_json manifest;
    manifest["tool"] = "climpanel";
    manifest["seed"] = c.seed;
    manifest["draws"] = c.draws;
    manifest["bias_correction"] = c.projection.bias_correction;
    manifest["regime_switching"] = c.projection.regime_switching;
    auto& inputs = manifest["inputs"];
    const auto record = [&](const fs::path& p) { inputs[p.lexically_normal().string()] = sha256_file(p); };
    for (const auto& p : c.grid) record(p);
    for (const auto& p : c.weights) record(p);
    for (const auto& p : {c.panel, c.spec, c.growth, c.shares}) record(p);
    if (c.candidates) record(*c.candidates);
    for (const auto& [_, p] : c.variants) record(p);
    std::vector<fs::path> climate_files;
    for (const auto& e : fs::directory_iterator(c.climate)) {
        if (e.path().extension() == ".csv") climate_files.push_back(e.path());
    }
    std::sort(climate_files.begin(), climate_files.end());
    for (const auto& p : climate_files) record(p);

    const auto panel = stage("aggregate", [&] {
        auto data = io::read_panel(c.panel);
        if (c.grid.empty()) return data;
        const auto grids = io::read_grid(c.grid);
        const auto weights = io::read_weights(c.weights);
        const auto schema = weather::RegressorSchema::defaults();
        const auto req = aggregation_requests(data, grids, weights);
        const auto regs = weather::aggregate(req, schema, grids, weights);
        io::write_regressors(c.output / "regressors.csv", regs, schema);
        return merge_regressors(data, regs, schema);
    });

    const auto spec = stage("fit", [&] {
        auto s = io::read_spec(c.spec);
        const auto result = s.interaction == Interaction::low_income ? fit_interacted(s, panel) : fit(s, panel);
        io::write_fit_json(c.output / "fit.json", result);
        return s;
    });

    if (c.candidates) {
        stage("select-spec", [&] {
            SelectionOptions so;
            so.base.fixed_effects = spec.fixed_effects;
            so.base.precip_control = spec.precip_control;
            so.base.outcome = spec.outcome;
            const auto candidates = io::read_candidates(*c.candidates);
            io::write_cv_report(c.output / "cv.csv", select(candidates, panel, so));
        });
    }

    const auto runs = c.output / "runs";
    const auto report = stage("project", [&] {
        EnsembleConfig ec;
        ec.bootstrap.n_draws = c.draws;
        ec.bootstrap.seed = c.seed;
        ec.projection = c.projection;
        if (c.variants.empty()) {
            ec.variants.push_back({"main", spec});
        } else {
            for (const auto& [name, path] : c.variants) ec.variants.push_back({name, io::read_spec(path)});
        }
        const auto climates = io::read_climate_dir(c.climate);
        const auto growth = growth_scenarios(panel, c.growth, c.scenarios, c.projection);
        return run_ensemble(panel, climates, growth, ec, runs);
    });
    if (report.ok()) {
        stage("report", [&] { write_report(runs, io::read_shares(c.shares), c.output / "summary.csv"); });
    }

    auto& outputs = manifest["outputs"];
    std::vector<fs::path> produced;
    for (const auto& e : fs::recursive_directory_iterator(c.output)) {
        if (e.is_regular_file() && e.path().filename() != "manifest.json") produced.push_back(e.path());
    }
    std::sort(produced.begin(), produced.end());
    for (const auto& p : produced) outputs[fs::relative(p, c.output).string()] = sha256_file(p);
    csv::AtomicWriter out(c.output / "manifest.json");
    out.stream() << manifest.dump(2) << '\n';
    out.commit();
    return report.ok();
}

}  // namespace climpanel
