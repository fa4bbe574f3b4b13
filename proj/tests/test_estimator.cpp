#include <doctest.h>

#include <random>

#include "climpanel/demean.hpp"
#include "climpanel/errors.hpp"
#include "climpanel/estimator.hpp"
#include "climpanel/synthetic.hpp"
#include "support.hpp"

using namespace climpanel;
using testing_support::dummy_ols;
using testing_support::naive_sandwich;
using testing_support::random_panel;

namespace {

ModelSpec quad_spec() {
    ModelSpec s;
    s.form = Form::polynomial;
    s.poly_order = 2;
    s.precip_control = PrecipControl::none;
    return s;
}

std::vector<int> dense(const std::vector<int>& keys) {
    std::map<int, int> ids;
    for (int k : keys) ids.emplace(k, 0);
    int next = 0;
    for (auto& [_, id] : ids) id = next++;
    std::vector<int> out;
    for (int k : keys) out.push_back(ids[k]);
    return out;
}

// Coefficients of the two-way model from explicit dummies.
Eigen::VectorXd oracle_coefficients(const Design& d) {
    return dummy_ols(d.x, d.y, dense(d.clusters), dense(d.years));
}

ModelSpec fixed_spec(Form form) {
    ModelSpec s;
    s.form = form;
    s.precip_control = PrecipControl::none;
    return s;
}

std::vector<std::string> fine_bin_columns() {
    std::vector<std::string> cols{"tbin_lt10"};
    for (int t = 10; t < 40; ++t) cols.push_back("tbin_" + std::to_string(t) + "_" + std::to_string(t + 1));
    cols.push_back("tbin_ge40");
    return cols;
}

}  // namespace

TEST_CASE("design layout") {
    synth::Options o;
    o.n_provinces = 77;
    o.first_year = 1982;
    o.last_year = 2022;
    o.seed = 2;
    const auto full = synth::panel(o);
    REQUIRE(full.rows() == 77u * 41u);

    SUBCASE("unbalanced 77 x 41 panel with 3,086 rows, quadratic") {
        std::vector<bool> keep(full.rows(), true);
        // Drop the first 71 years of coverage spread over the first provinces.
        int dropped = 0;
        for (std::size_t r = 0; r < full.rows() && dropped < 71; ++r) {
            if (full.year(r) < 1982 + 2) {
                keep[r] = false;
                ++dropped;
            }
        }
        const auto data = full.filter(keep);
        ModelSpec s;
        const auto d = build_design(s, data);
        CHECK(d.x.rows() == 3086);
        CHECK(d.x.cols() == 4);
        CHECK(d.layout.names == std::vector<std::string>{"temp_p1", "temp_p2", "prcp", "prcp2"});
    }
    SUBCASE("seven bins omitting the fourth") {
        ModelSpec s;
        s.form = Form::bins;
        const auto d = build_design(s, full);
        int temp = 0, precip = 0;
        for (const auto& r : d.layout.roles) (r.kind == ColumnKind::temperature ? temp : precip)++;
        CHECK(temp == 6);
        CHECK(precip == 5);
        for (const auto& n : d.layout.names) CHECK(n != "tbin_23_28");
    }
    SUBCASE("five lags") {
        ModelSpec s;
        s.n_lags = 5;
        const auto d = build_design(s, full);
        CHECK(d.x.cols() == 24);
        CHECK(d.x.rows() == static_cast<Eigen::Index>(77 * (41 - 5)));
        CHECK(d.layout.names[2] == "temp_p1_L1");
    }
    SUBCASE("too few years for the lags") {
        synth::Options tiny = o;
        tiny.n_provinces = 3;
        tiny.first_year = 2020;
        tiny.last_year = 2022;
        ModelSpec s;
        s.n_lags = 3;
        CHECK_THROWS_AS(build_design(s, synth::panel(tiny)), Error);
    }
}

TEST_CASE("fixed-effect absorption") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z;
    Eigen::MatrixXd m(12, 2);
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, 0) = z(rng), m(i, 1) = z(rng);
    std::vector<long> g1{0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3};
    std::vector<long> g2{0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 1};

    SUBCASE("one factor is exact group demeaning in one sweep") {
        const std::vector<FactorCodes> f{make_factor(g1)};
        const auto r = absorb_fixed_effects(m, f);
        CHECK(r.sweeps == 1);
        for (int g = 0; g < 4; ++g) {
            const double mean = (m(3 * g, 0) + m(3 * g + 1, 0) + m(3 * g + 2, 0)) / 3.0;
            for (int k = 0; k < 3; ++k) CHECK(std::abs(r.data(3 * g + k, 0) - (m(3 * g + k, 0) - mean)) < 1e-14);
        }
    }
    SUBCASE("two factors match residuals from dummy regression") {
        const std::vector<FactorCodes> f{make_factor(g1), make_factor(g2)};
        const auto r = absorb_fixed_effects(m, f);
        Eigen::MatrixXd dummies = Eigen::MatrixXd::Zero(12, 4 + 2);
        for (int i = 0; i < 12; ++i) {
            dummies(i, g1[static_cast<std::size_t>(i)]) = 1.0;
            if (g2[static_cast<std::size_t>(i)] > 0) dummies(i, 3 + g2[static_cast<std::size_t>(i)]) = 1.0;
        }
        for (int c = 0; c < 2; ++c) {
            const Eigen::VectorXd fitted = dummies * dummies.colPivHouseholderQr().solve(m.col(c));
            const Eigen::VectorXd resid = m.col(c) - fitted;
            CHECK((r.data.col(c) - resid).cwiseAbs().maxCoeff() < 1e-8);
        }
    }
    SUBCASE("already demeaned data is left alone") {
        // Balanced layout: the first pass is exact, not merely within tolerance.
        const std::vector<long> year{0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2};
        const std::vector<FactorCodes> f{make_factor(g1), make_factor(year)};
        const auto once = absorb_fixed_effects(m, f);
        const auto twice = absorb_fixed_effects(once.data, f);
        CHECK((twice.data - once.data).cwiseAbs().maxCoeff() <= 1e-12);
    }
    SUBCASE("parallel and serial agree exactly") {
        const std::vector<FactorCodes> f{make_factor(g1), make_factor(g2)};
        CHECK(absorb_fixed_effects(m, f).data == serial::absorb_fixed_effects(m, f).data);
    }
    SUBCASE("sweep limit") {
        const std::vector<FactorCodes> f{make_factor(g1), make_factor(g2)};
        CHECK_THROWS_AS(absorb_fixed_effects(m, f, {1e-30, 1}), Error);
    }
    SUBCASE("recovered effects reproduce the fitted values") {
        const std::vector<FactorCodes> f{make_factor(g1), make_factor(g2)};
        const Eigen::VectorXd v = m.col(0);
        const Eigen::VectorXd demeaned = absorb_fixed_effects(m, f).data.col(0);
        const auto eff = recover_effects(v, f);
        for (std::size_t i = 0; i < 12; ++i) {
            const double fitted = eff[0][static_cast<std::size_t>(f[0].codes[i])] + eff[1][static_cast<std::size_t>(f[1].codes[i])];
            CHECK(std::abs(v[static_cast<Eigen::Index>(i)] - fitted - demeaned[static_cast<Eigen::Index>(i)]) < 1e-8);
        }
    }
}

TEST_CASE("within estimator equals dummy-variable OLS") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        const auto data = random_panel(rng, 4 + static_cast<int>(seed % 5), 4 + static_cast<int>(seed % 7), 0.7, -0.4,
                                       1.0, seed % 2 ? 0.2 : 0.0);
        const auto spec = quad_spec();
        const auto r = fit(spec, data);
        const auto oracle = oracle_coefficients(build_design(spec, data));
        CHECK((r.coefficients - oracle).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("clustered covariance") {
    SUBCASE("three clusters against the naive loop") {
        Eigen::MatrixXd x(7, 2);
        x << 1.0, 0.5, -0.3, 2.0, 0.8, -1.1, 1.7, 0.2, -0.9, 0.4, 0.1, 1.3, 2.2, -0.7;
        Eigen::VectorXd e(7);
        e << 0.3, -0.2, 0.5, -0.4, 0.1, 0.25, -0.6;
        const std::vector<int> cl{0, 0, 1, 1, 1, 2, 2};
        const auto v = cluster_robust_vcov(x, e, cl);
        CHECK((v - naive_sandwich(x, e, cl, 2)).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((v - v.transpose()).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("single cluster") {
        Eigen::MatrixXd x = Eigen::MatrixXd::Identity(3, 2);
        Eigen::VectorXd e = Eigen::VectorXd::Ones(3);
        const std::vector<int> cl{4, 4, 4};
        try {
            cluster_robust_vcov(x, e, cl);
            FAIL("expected DegenerateClustering");
        } catch (const Error& err) {
            CHECK(err.kind() == ErrorKind::degenerate_clustering);
        }
    }
    SUBCASE("fit vcov equals the sandwich on the demeaned design and is PSD") {
        std::mt19937_64 rng(17);
        const auto data = random_panel(rng, 9, 8, 0.5, 0.2, 1.0, 0.1);
        const auto spec = quad_spec();
        const auto r = fit(spec, data);
        const auto d = build_design(spec, data);
        const auto f = d.factors();
        Eigen::MatrixXd xy(d.x.rows(), d.x.cols() + 1);
        xy << d.x, d.y;
        const auto dm = absorb_fixed_effects(xy, f).data;
        const Eigen::MatrixXd xd = dm.leftCols(d.x.cols());
        const Eigen::VectorXd e = dm.col(d.x.cols()) - xd * r.coefficients;
        CHECK((r.vcov - naive_sandwich(xd, e, d.clusters, 2)).cwiseAbs().maxCoeff() < 1e-10);
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r.vcov);
        CHECK(eig.eigenvalues().minCoeff() >= -1e-10 * r.vcov.trace());
    }
    SUBCASE("homoskedastic noise: clustered near classical on average") {
        double ratio = 0.0;
        const int sims = 200;
        for (int s = 0; s < sims; ++s) {
            std::mt19937_64 rng(1000 + static_cast<std::uint64_t>(s));
            const auto data = random_panel(rng, 40, 5, 0.5, 0.2);
            const auto spec = quad_spec();
            const auto r = fit(spec, data);
            const auto d = build_design(spec, data);
            Eigen::MatrixXd xy(d.x.rows(), d.x.cols() + 1);
            xy << d.x, d.y;
            const auto dm = absorb_fixed_effects(xy, d.factors()).data;
            const Eigen::MatrixXd xd = dm.leftCols(2);
            const Eigen::VectorXd e = dm.col(2) - xd * r.coefficients;
            const double dof = static_cast<double>(d.x.rows() - 40 - 5 + 1 - 2);
            const Eigen::MatrixXd classical = (xd.transpose() * xd).inverse() * (e.squaredNorm() / dof);
            ratio += std::sqrt(r.vcov(0, 0) / classical(0, 0));
        }
        CHECK(std::abs(ratio / sims - 1.0) < 0.2);
    }
}

TEST_CASE("fit properties") {
    std::mt19937_64 rng(23);
    const auto data = random_panel(rng, 12, 10, 0.6, -0.3);
    const auto spec = quad_spec();
    const auto base = fit(spec, data);

    SUBCASE("scale equivariance") {
        auto scaled = data;
        auto y = scaled.column("growth");
        for (auto& v : y) v *= 3.5;
        scaled.set_column("growth", y);
        const auto r = fit(spec, scaled);
        for (Eigen::Index k = 0; k < 2; ++k) {
            CHECK(std::abs(r.coefficients[k] - 3.5 * base.coefficients[k]) < 1e-10 * std::max(1.0, std::abs(r.coefficients[k])));
            const double t0 = base.coefficients[k] / std::sqrt(base.vcov(k, k));
            const double t1 = r.coefficients[k] / std::sqrt(r.vcov(k, k));
            CHECK(std::abs(t0 - t1) < 1e-10 * std::max(1.0, std::abs(t0)));
        }
    }
    SUBCASE("duplicating every row keeps coefficients and SEs up to the small-sample factor") {
        PanelDataset doubled(data.column_names());
        for (int copy = 0; copy < 2; ++copy) {
            for (std::size_t r = 0; r < data.rows(); ++r) {
                std::vector<double> vals;
                for (const auto& c : data.column_names()) vals.push_back(data.column(c)[r]);
                // A second year index keeps (province, year) unique; year effects are doubled accordingly.
                doubled.add_row(data.province(r), data.year(r) + 100 * copy, "r", false, vals);
            }
        }
        doubled.finalize();
        auto s = spec;
        const auto r = fit(s, doubled);
        // Year codes differ between copies, but each copy's year effect is identical, so the
        // within-transformed system is the original one stacked twice.
        CHECK((r.coefficients - base.coefficients).cwiseAbs().maxCoeff() < 1e-8);
        const double n = static_cast<double>(data.rows());
        const double k = 2.0;
        const double f1 = (n - 1.0) / (n - k);
        const double f2 = (2.0 * n - 1.0) / (2.0 * n - k);
        for (Eigen::Index j = 0; j < 2; ++j) CHECK(r.vcov(j, j) / f2 == doctest::Approx(base.vcov(j, j) / f1).epsilon(1e-6));
    }
    SUBCASE("r2 includes the fixed effects, within r2 does not") {
        CHECK(base.r2 > base.within_r2);
        CHECK(base.within_r2 > 0.0);
        CHECK(base.r2 < 1.0);
        CHECK(base.n_obs == data.rows());
        CHECK(base.cluster_count == 12);
    }
    SUBCASE("collinear columns are named") {
        auto bad = data;
        auto x2 = bad.column("temp_p1");
        for (auto& v : x2) v *= 2.0;
        bad.set_column("temp_p2", x2);
        try {
            fit(spec, bad);
            FAIL("expected CollinearDesign");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::collinear_design);
            CHECK(std::string(e.what()).find("temp_p") != std::string::npos);
        }
    }
    SUBCASE("a regressor absorbed by the province effects is collinear") {
        auto bad = data;
        std::vector<double> x(bad.rows());
        for (std::size_t r = 0; r < bad.rows(); ++r) x[r] = bad.province_index(r);
        bad.set_column("temp_p2", x);
        CHECK_THROWS_AS(fit(spec, bad), Error);
    }
}

TEST_CASE("synthetic quadratic response is recovered") {
    synth::Options o;
    o.n_provinces = 30;
    o.first_year = 1983;
    o.seed = 31;
    const auto data = synth::panel(o);
    const auto r = fit(ModelSpec{}, data);
    CHECK(std::abs(r.coefficient("temp_p1") - 0.05) < 3.0 * r.std_error("temp_p1"));
    CHECK(std::abs(r.coefficient("temp_p2") + 0.001) < 3.0 * r.std_error("temp_p2"));
}

TEST_CASE("interacted fit") {
    synth::Options o;
    o.n_provinces = 24;
    o.seed = 41;
    auto data = synth::panel(o);
    // Low-income provinces get a steeper curve.
    auto y = data.column("growth");
    const auto& t1 = data.column("temp_p1");
    const auto& t2 = data.column("temp_p2");
    for (std::size_t r = 0; r < data.rows(); ++r) {
        if (data.low_income(r)) y[r] += 0.02 * t1[r] - 0.0005 * t2[r];
    }
    data.set_column("growth", y);
    ModelSpec s;
    s.interaction = Interaction::low_income;
    const auto r = fit_interacted(s, data);
    CHECK(std::abs(r.coefficient("temp_p2:low") + 0.0015) < 3.0 * r.std_error("temp_p2:low"));
    CHECK(std::abs(r.coefficient("temp_p2:high") + 0.001) < 3.0 * r.std_error("temp_p2:high"));
    CHECK(std::abs(r.coefficient("temp_p1:low") - 0.07) < 3.0 * r.std_error("temp_p1:low"));

    SUBCASE("one empty group is collinear") {
        PanelDataset flat(data.column_names());
        for (std::size_t row = 0; row < data.rows(); ++row) {
            std::vector<double> vals;
            for (const auto& c : data.column_names()) vals.push_back(data.column(c)[row]);
            flat.add_row(data.province(row), data.year(row), data.region(row), false, vals);
        }
        flat.finalize();
        try {
            fit_interacted(s, flat);
            FAIL("expected CollinearDesign");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::collinear_design);
        }
    }
}

TEST_CASE("response and marginal rates on stored coefficients") {
    const std::vector<std::string> cols{"temp_p1", "temp_p2", "hdd_23", "cdd_28"};

    SUBCASE("rounded quadratic coefficients") {
        const auto f = fixed_coefficients(fixed_spec(Form::polynomial), cols, {{"temp_p1", 0.0494}, {"temp_p2", -0.0009}});
        CHECK(std::abs(response_at(f, 35, 26).effect - (-0.0495)) < 1e-6);
        CHECK(response_at(f, 26, 26).effect == 0.0);
        const double vertex = -0.0494 / (2 * -0.0009);
        CHECK(vertex > 20.0);
        CHECK(vertex < 32.0);
        for (double t = 12.0; t < vertex - 0.5; t += 1.0) CHECK(response_at(f, t + 0.5, 26).effect > response_at(f, t, 26).effect);
        for (double t = vertex + 0.5; t < 40.0; t += 1.0) CHECK(response_at(f, t + 0.5, 26).effect < response_at(f, t, 26).effect);
    }
    SUBCASE("cooling degree days") {
        const auto f = fixed_coefficients(fixed_spec(Form::degree_days), cols, {{"hdd_23", -0.0116}, {"cdd_28", -0.0104}});
        CHECK(response_at(f, 35, 26).effect == doctest::Approx(7 * -0.0104).epsilon(1e-12));
        CHECK(response_at(f, 35, 26).effect == doctest::Approx(-0.0729).epsilon(0.002));
        CHECK(response_at(f, 20, 26).effect == doctest::Approx(3 * -0.0116).epsilon(1e-12));
    }
    SUBCASE("quadratic marginal rate") {
        // Coefficients whose effect at 30 C vs 26 C is -0.0137.
        const double b2 = -0.0009;
        const double b1 = (-0.0137 - b2 * (900.0 - 676.0)) / 4.0;
        const auto f = fixed_coefficients(fixed_spec(Form::polynomial), cols, {{"temp_p1", b1}, {"temp_p2", b2}});
        CHECK(response_at(f, 30, 26).effect == doctest::Approx(-0.0137).epsilon(1e-12));
        CHECK(std::abs(marginal_warming_rate(f, 30, 26) - (-1.250)) < 0.01);
        CHECK(std::abs(marginal_warming_rate(f, 30, 26) - (-1.248)) < 0.01);
    }
    SUBCASE("bins marginal rate and reference invariance") {
        auto spec = fixed_spec(Form::bins);
        const auto f = fixed_coefficients(spec, fine_bin_columns(),
                                          {{"tbin_lt13", -0.02}, {"tbin_28_33", -0.0406}, {"tbin_ge38", -0.1}});
        CHECK(response_at(f, 30, 26).effect == -0.0406);
        CHECK(response_at(f, 25, 26).effect == 0.0);
        CHECK(std::abs(marginal_warming_rate(f, 30, 26) - (-3.705)) < 0.01);
        CHECK(std::abs(marginal_warming_rate(f, 30, 26) - (-3.700)) < 0.01);

        // Omitting [28, 33) instead shifts every coefficient by +0.0406.
        spec.omitted_bin = 4;
        const auto g = fixed_coefficients(spec, fine_bin_columns(),
                                          {{"tbin_lt13", 0.0206}, {"tbin_13_18", 0.0406}, {"tbin_18_23", 0.0406},
                                           {"tbin_23_28", 0.0406}, {"tbin_33_38", 0.0406}, {"tbin_ge38", -0.0594}});
        for (double a : {12.0, 20.0, 26.0, 30.0, 40.0})
            for (double b : {15.0, 27.0, 35.0})
                CHECK(std::abs((response_at(f, a, b).effect) - (response_at(g, a, b).effect)) < 1e-10);
    }
    SUBCASE("zero effect and support") {
        const auto f = fixed_coefficients(fixed_spec(Form::polynomial), cols, {});
        CHECK(marginal_warming_rate(f, 30, 26) == 0.0);
        CHECK_THROWS_AS(response_at(f, 45, 26), Error);
        CHECK_THROWS_AS(marginal_warming_rate(f, 26, 26), Error);
    }
    SUBCASE("delta-method standard error") {
        Eigen::MatrixXd v(2, 2);
        v << 4e-4, -1e-5, -1e-5, 3e-7;
        const auto f = fixed_coefficients(fixed_spec(Form::polynomial), {"temp_p1", "temp_p2"},
                                          {{"temp_p1", 0.0494}, {"temp_p2", -0.0009}}, v);
        const Eigen::Vector2d c(9.0, 35.0 * 35.0 - 26.0 * 26.0);
        CHECK(response_at(f, 35, 26).std_err == doctest::Approx(std::sqrt(c.dot(v * c))).epsilon(1e-12));
    }
}

TEST_CASE("lag responses cumulate") {
    synth::Options o;
    o.n_provinces = 10;
    o.seed = 3;
    const auto data = synth::panel(o);
    ModelSpec s;
    s.n_lags = 2;
    const auto r = fit(s, data);
    const auto contemporaneous = response_at(r, 33, 26, 0).effect;
    CHECK(contemporaneous == doctest::Approx(r.coefficient("temp_p1") * 7 + r.coefficient("temp_p2") * (33 * 33 - 26 * 26)));
    const auto all = response_at(r, 33, 26).effect;
    double manual = 0.0;
    for (const auto* suffix : {"", "_L1", "_L2"})
        manual += r.coefficient(std::string("temp_p1") + suffix) * 7 + r.coefficient(std::string("temp_p2") + suffix) * (33 * 33 - 26 * 26);
    CHECK(all == doctest::Approx(manual).epsilon(1e-12));
    CHECK(response_at(r, 33, 26).n_lags_included == 2);
}

TEST_CASE("alternative formulation") {
    synth::Options o;
    o.n_provinces = 30;
    o.beta2 = 0.0;
    o.seed = 8;
    const auto data = synth::panel(o);
    const auto r = fit_alternative_formulation(data, IncomeKind::none);
    // A linear response has no curvature across province climates.
    CHECK(std::abs(r.coefficient("temp_x_tbar")) < 3.0 * r.std_error("temp_x_tbar"));
    const auto lo = alternative_marginal_effect(r, 20.0);
    const auto hi = alternative_marginal_effect(r, 35.0);
    CHECK(std::abs(lo.effect - 0.05) < 3.0 * lo.std_err);
    CHECK(std::abs(hi.effect - 0.05) < 3.0 * hi.std_err);

    const auto level = fit_alternative_formulation(data, IncomeKind::level);
    CHECK(level.index_of("temp_x_ybar").has_value());
}
