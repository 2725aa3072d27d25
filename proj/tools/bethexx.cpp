// bethexx: solved states, form factors and verification reports as JSON or CSV.
//
// Exit codes: 0 success, 1 configuration or solver failure, 2 a verification
// check outside its tolerance.

#include <bethexx/bethexx.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <future>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace bethexx;
using json = nlohmann::json;

namespace {

enum Exit { kOk = 0, kFailure = 1, kValidation = 2 };

struct RunConfig {
    std::string command;
    int M = 0;
    std::string spec;
    std::string format = "json";
    double tol = 0.0;  // 0: the command default
    unsigned seed = 1;
    int threads = 1;
    double bulk_cutoff = 2.5;
    double contour_alpha = 0.2;
    int quad_nodes = 61;
    int Mstar = 48;
    std::string precision = "double";
    std::string suite;
    bool compare_ed = false;
    double a = 1.0, mu_re = 0.0, mu_im = 0.0;
    int points = 13;
    double lambda_max = 3.0;

    double tol_or(double fallback) const { return tol > 0.0 ? tol : fallback; }
    QuadOptions quad() const {
        QuadOptions o;
        o.alpha = contour_alpha;
        o.nodes = quad_nodes;
        return o;
    }
    SolveOptions solve() const {
        SolveOptions o;
        o.Mstar = Mstar;
        return o;
    }
};

json cj(cplx z) { return json::array({z.real(), z.imag()}); }

template <class V>
json cj_list(const V& v) {
    json a = json::array();
    for (const auto& z : v) a.push_back(cj(to_double(z)));
    return a;
}

// FNV-1a over the canonical dump; gives a platform-stable ordering key.
std::string spec_hash(const json& j) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : j.dump()) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << h;
    return s.str();
}

// ------------------------------------------------------------------ config

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::ConfigParse, what); }

void validate(RunConfig& c) {
    if (const char* p = std::getenv("BETHEXX_PRECISION")) c.precision = p;
    if (c.precision != "double" && c.precision != "extended") config_error("BETHEXX_PRECISION must be double or extended");
    if (c.M != 0 && (c.M < 2 || c.M % 2)) config_error("--M must be even and at least 2");
    if (c.tol < 0.0) config_error("--tol must be positive");
    if (c.threads < 1) config_error("--threads must be at least 1");
    if (!(c.bulk_cutoff > 0.0)) config_error("--bulk-cutoff must be positive");
    if (!(c.contour_alpha > 0.0 && c.contour_alpha < 0.3)) config_error("--contour-alpha must lie in (0, 0.3)");
    if (c.quad_nodes != 15 && c.quad_nodes != 31 && c.quad_nodes != 41 && c.quad_nodes != 51 && c.quad_nodes != 61)
        config_error("--quad-nodes must be 15, 31, 41, 51 or 61");
    if (c.Mstar < 2) config_error("--Mstar must be at least 2");
    if (c.format != "json" && c.format != "csv") config_error("--format must be json or csv");
}

json config_json(const RunConfig& c) {
    json j{{"M", c.M},
           {"seed", c.seed},
           {"format", c.format},
           {"threads", c.threads},
           {"bulk_cutoff", c.bulk_cutoff},
           {"contour_alpha", c.contour_alpha},
           {"quad_nodes", c.quad_nodes},
           {"Mstar", c.Mstar},
           {"precision", c.precision}};
    if (c.tol > 0.0) j["tol"] = c.tol;
    if (!c.spec.empty()) j["spec"] = c.spec;
    if (!c.suite.empty()) j["suite"] = c.suite;
    return j;
}

// Inline JSON when the argument starts with '{' or '[', otherwise a path.
json load_spec(const RunConfig& c) {
    if (c.spec.empty()) config_error("this command needs --spec");
    const auto first = c.spec.find_first_not_of(" \t\n");
    std::string text = c.spec;
    if (first == std::string::npos || (c.spec[first] != '{' && c.spec[first] != '[')) {
        std::ifstream in(c.spec);
        if (!in) config_error("cannot open spec file " + c.spec);
        std::stringstream ss;
        ss << in.rdbuf();
        text = ss.str();
    }
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        config_error(std::string("spec is not valid JSON: ") + e.what());
    }
}

ExcitationSpec parse_excitation(const json& j, int M_flag) {
    if (!j.is_object()) config_error("an excitation spec must be a JSON object");
    ExcitationSpec s;
    try {
        s.M = j.value("M", M_flag);
        if (M_flag != 0 && s.M != M_flag) config_error("--M disagrees with the spec");
        if (!j.contains("holes") || !j["holes"].is_array()) config_error("spec needs a \"holes\" array");
        s.holes = j["holes"].get<std::vector<int>>();
        if (j.contains("strings")) {
            const auto& st = j["strings"];
            s.n2s = st.value("n2s", 0);
            s.nq = st.value("nq", 0);
            s.nw = st.value("nw", 0);
        }
        if (j.contains("string_slots")) s.string_slots = j["string_slots"].get<std::vector<int>>();
    } catch (const json::exception& e) {
        config_error(std::string("malformed excitation spec: ") + e.what());
    }
    if (s.M < 2 || s.M % 2) config_error("spec M must be even and at least 2");
    return s;
}

std::vector<json> spec_items(const json& j) {
    if (j.is_array()) return {j.begin(), j.end()};
    return {j};
}

// ------------------------------------------------------------------ payloads

json state_json(const BetheState<double>& st) {
    json j{{"M", st.M},
           {"roots", cj_list(st.roots)},
           {"on_shell", st.on_shell},
           {"residual", st.deviation_frozen ? 0.0 : max_abs<double>(bethe_residuals(st))},
           {"residual_tol", st.tolerance},
           {"deviation_frozen", st.deviation_frozen},
           {"energy", bethe_energy(st)},
           {"momentum", bethe_momentum(st)}};
    return j;
}

json classification_json(const DLClassification& c) {
    json pairs = json::array();
    for (const auto& p : c.close_pairs) pairs.push_back({{"center", cj(p.center)}, {"delta", cj(p.delta)}});
    return {{"holes", c.holes},          {"hole_quantum_numbers", c.hole_quantum_numbers},
            {"n_r", c.n_r()},            {"n_2s", c.n_2s()},
            {"n_q", c.n_q()},            {"n_w", c.n_w()},
            {"n_h", c.n_h()},            {"spin", c.spin()},
            {"close_pairs", pairs},      {"higher_roots", cj_list(c.higher_roots)}};
}

json diagnostics_json(const FormFactorDiagnostics& d) {
    return {{"cond_slavnov_g", d.cond_slavnov_g},
            {"cond_slavnov_e", d.cond_slavnov_e},
            {"cond_gaudin_g", d.cond_gaudin_g},
            {"cond_gaudin_e", d.cond_gaudin_e},
            {"imag_ratio", d.imag_ratio},
            {"prefactor_log_abs", d.prefactor_log_abs},
            {"ground_residual", d.ground_residual},
            {"excited_residual", d.excited_residual},
            {"deltas", cj_list(d.deltas)},
            {"ill_conditioned", d.ill_conditioned},
            {"selection_rule_zero", d.selection_rule_zero},
            {"holes_outside_bulk", d.holes_outside_bulk},
            {"notes", d.notes}};
}

ExcitationResult solve_spec(const ExcitationSpec& s, const RunConfig& c) {
    return s.n2s + s.nq + s.nw == 0 ? solve_hole_excitation(s, c.solve()) : solve_close_pair_state(s, c.solve());
}

double ed_form_factor(const BetheState<double>& g, const BetheState<double>& e) {
    const ComplexVector vg = ed::bethe_vector_full(g.roots, g.M);
    const ComplexVector ve = ed::total_sminus(ed::bethe_vector_full(e.roots, e.M));
    return std::norm(ed::direct_form_factor_full(vg, ve, 1, ed::SpinOp::z));
}

FormFactorResult finite_in_precision(const BetheState<double>& gs, const BetheState<double>& ex, const RunConfig& c) {
    if (c.precision == "extended") {
        auto r = finite_form_factor(convert_state<ext_real>(gs), convert_state<ext_real>(ex));
        r.pipeline = "finite-extended";
        return r;
    }
    return finite_form_factor(gs, ex);
}

// One result per spec item; items run on up to c.threads workers and are
// emitted sorted by spec hash.
struct ItemOutcome {
    json value;
    int exit = kOk;
};

template <class F>
ItemOutcome run_items(const RunConfig& c, F&& one) {
    const json spec = load_spec(c);
    const auto items = spec_items(spec);
    std::vector<std::pair<std::string, json>> keyed;
    for (const auto& it : items) keyed.emplace_back(spec_hash(it), it);
    std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<ItemOutcome> out(keyed.size());
    auto task = [&](std::size_t k) {
        ItemOutcome r;
        try {
            r = one(parse_excitation(keyed[k].second, c.M));
        } catch (const Error& e) {
            if (e.code() == ErrorCode::ConfigParse) throw;
            r.value = {{"error", {{"code", to_string(e.code())}, {"message", e.what()}}}};
            r.exit = kFailure;
        }
        r.value["spec"] = keyed[k].second;
        r.value["spec_hash"] = keyed[k].first;
        return r;
    };
    for (std::size_t k = 0; k < keyed.size(); k += static_cast<std::size_t>(c.threads)) {
        std::vector<std::future<ItemOutcome>> jobs;
        for (std::size_t j = k; j < std::min(keyed.size(), k + c.threads); ++j)
            jobs.push_back(std::async(c.threads > 1 ? std::launch::async : std::launch::deferred, task, j));
        for (std::size_t j = 0; j < jobs.size(); ++j) out[k + j] = jobs[j].get();
    }
    ItemOutcome all;
    all.value = json::array();
    for (auto& r : out) {
        all.exit = std::max(all.exit, r.exit);
        all.value.push_back(std::move(r.value));
    }
    if (!spec.is_array()) all.value = all.value[0];
    return all;
}

// ------------------------------------------------------------------ commands

ItemOutcome cmd_gs(const RunConfig& c) {
    if (c.M == 0) config_error("gs needs --M");
    const auto gs = solve_ground_state(c.M, c.solve());
    return {state_json(gs), kOk};
}

ItemOutcome cmd_excite(const RunConfig& c) {
    return run_items(c, [&](const ExcitationSpec& s) {
        const auto ex = solve_spec(s, c);
        const auto gs = solve_ground_state(s.M, c.solve());
        json j{{"state", state_json(ex.state)},
               {"classification", classification_json(ex.classification)},
               {"extended_used", ex.extended_used},
               {"takahashi_residual", ex.takahashi_residual}};
        if (ex.classification.n_h() % 2 == 0) {
            const auto k = spinon_energy_momentum(ex.classification.holes);
            j["gap"] = {{"dE_bethe_over_4", (bethe_energy(ex.state) - bethe_energy(gs)) / 4.0},
                        {"dE_spinon", k.dE},
                        {"dP_bethe", reduce_angle(bethe_momentum(ex.state) - bethe_momentum(gs))},
                        {"dP_spinon", k.dP},
                        {"tolerance", 5.0 / s.M}};
        }
        return ItemOutcome{j, ex.state.on_shell || ex.state.deviation_frozen ? kOk : kFailure};
    });
}

json higher_level_json(const std::vector<double>& holes, int n_tilde, double tol) {
    const auto sol = solve_higher_level(holes, n_tilde);
    json br = json::array();
    for (std::size_t k = 0; k < sol.branches.size(); ++k) {
        const auto sys = make_higher_level_system(holes, sol.branches[k]);
        br.push_back({{"roots", cj_list(sol.branches[k])},
                      {"residual", sol.residuals[k]},
                      {"gamma_H_residual", sys.residual()},
                      {"tolerance", tol}});
    }
    return {{"holes", holes}, {"n_tilde", n_tilde}, {"branches", br}};
}

ItemOutcome cmd_hlbe(const RunConfig& c) {
    const json spec = load_spec(c);
    const double tol = c.tol_or(1e-12);
    std::vector<double> holes;
    int n_tilde = 0;
    if (spec.contains("theta")) {
        try {
            holes = spec["theta"].get<std::vector<double>>();
            n_tilde = spec.value("n_tilde", 1);
        } catch (const json::exception& e) {
            config_error(std::string("malformed hlbe spec: ") + e.what());
        }
    } else {
        const auto ex = solve_spec(parse_excitation(spec, c.M), c);
        holes = ex.classification.holes;
        n_tilde = ex.classification.n_tilde();
    }
    json j = higher_level_json(holes, n_tilde, tol);
    bool ok = !j["branches"].empty();
    for (const auto& b : j["branches"]) ok = ok && b["residual"].get<double>() <= tol && b["gamma_H_residual"].get<double>() <= tol;
    return {j, ok ? kOk : kFailure};
}

ItemOutcome cmd_ff_finite(const RunConfig& c) {
    return run_items(c, [&](const ExcitationSpec& s) {
        const auto gs = solve_ground_state(s.M, c.solve());
        const auto ex = solve_spec(s, c);
        const auto ff = finite_in_precision(gs, ex.state, c);
        json j{{"pipeline", ff.pipeline},
               {"value", ff.value},
               {"raw", cj(ff.raw)},
               {"log_abs", ff.log_value.log_abs},
               {"diagnostics", diagnostics_json(ff.diagnostics)}};
        int code = kOk;
        if (c.compare_ed) {
            if (s.M > 16) throw Error(ErrorCode::SizeLimitExceeded, "ED comparison needs M <= 16");
            const double ed = ed_form_factor(gs, ex.state);
            const double rd = ed != 0.0 ? std::abs(ff.value - ed) / ed : std::abs(ff.value);
            const double tol = c.tol_or(1e-8);
            j["ed"] = {{"value", ed}, {"relative_difference", rd}, {"tolerance", tol}, {"within_tolerance", rd <= tol}};
            if (!(rd <= tol)) code = kValidation;
        }
        return ItemOutcome{j, code};
    });
}

ItemOutcome cmd_ff_thermo(const RunConfig& c) {
    return run_items(c, [&](const ExcitationSpec& s) {
        const auto gs = solve_ground_state(s.M, c.solve());
        const auto ex = solve_spec(s, c);
        ThermoOptions o;
        o.bulk_cutoff = c.bulk_cutoff;
        const auto th = thermo_form_factor(gs, ex.state, o);
        const auto fin = finite_in_precision(gs, ex.state, c);
        json j{{"pipeline", th.ff.pipeline},
               {"value", th.ff.value},
               {"raw", cj(th.ff.raw)},
               {"holes", th.holes},
               {"higher_level_residual", th.higher_residual},
               {"finite_value", fin.value},
               {"relative_to_finite", fin.value != 0.0 ? th.ff.value / fin.value - 1.0 : 0.0},
               {"diagnostics", diagnostics_json(th.ff.diagnostics)}};
        if (!th.holes.empty()) {
            j["asymptotic_prefactor"] = {{"log_abs", th.asymptotic_prefactor.log_abs},
                                         {"value", cj(th.asymptotic_prefactor.value())}};
        }
        return ItemOutcome{j, kOk};
    });
}

ItemOutcome cmd_densities(const RunConfig& c) {
    if (c.a != 0.5 && c.a != 1.0) config_error("--a must be 0.5 or 1");
    if (c.points < 1) config_error("--points must be positive");
    const cplx mu(c.mu_re, c.mu_im);
    const auto branch = density_branch(c.a, mu);
    const double tol = c.tol_or(1e-8);
    json rows = json::array();
    double worst = 0.0;
    for (int k = 0; k < c.points; ++k) {
        const double l = c.points == 1 ? 0.0 : -c.lambda_max + 2.0 * c.lambda_max * k / (c.points - 1);
        const double r = lieb_residual(c.a, l, mu, c.quad());
        worst = std::max(worst, r);
        rows.push_back({{"lambda", l}, {"rho", cj(density(c.a, l, mu))}, {"residual", r}});
    }
    json j{{"a", c.a},
           {"mu", cj(mu)},
           {"branch", branch == DensityBranch::inside ? "inside" : "outside"},
           {"points", rows},
           {"max_residual", worst},
           {"tolerance", tol}};
    return {j, worst <= tol ? kOk : kValidation};
}

// ------------------------------------------------------------------ verify

json check_row(const std::string& name, double value, double tol) {
    return {{"name", name}, {"value", value}, {"tolerance", tol}, {"pass", value <= tol}};
}

ItemOutcome suite_ed(const RunConfig& c) {
    const double tol = c.tol_or(1e-8);
    std::mt19937 rng(c.seed);
    std::normal_distribution<double> g;
    json rows = json::array();
    const std::vector<int> sizes = c.M ? std::vector<int>{c.M} : std::vector<int>{8, 10};
    for (int M : sizes) {
        if (M > 14) throw Error(ErrorCode::SizeLimitExceeded, "verify ed needs M <= 14");
        const auto gs = solve_ground_state(M, c.solve());
        double norm = 0.0, slav = 0.0, ff = 0.0;
        for (int a = 0; a < M / 2 + 1; ++a)
            for (int b = a + 1; b < M / 2 + 1; ++b) {
                const auto ex = solve_hole_excitation({M, {a, b}}, c.solve());
                const ComplexVector dual = ed::dual_vector_full(ex.state.roots, M);
                const cplx n_ed = ed::bilinear(dual, ed::bethe_vector_full(ex.state.roots, M));
                norm = std::max(norm, std::abs(gaudin_norm(ex.state).value() - n_ed) / std::abs(n_ed));
                std::vector<cplx> mu;
                for (std::size_t k = 0; k < ex.state.roots.size(); ++k) mu.emplace_back(g(rng), 0.3 * g(rng));
                const cplx s_ed = ed::bilinear(dual, ed::bethe_vector_full(mu, M));
                slav = std::max(slav, std::abs(slavnov_scalar_product(ex.state, mu).value() - s_ed) / std::abs(s_ed));
                const double f_ed = ed_form_factor(gs, ex.state);
                ff = std::max(ff, std::abs(finite_in_precision(gs, ex.state, c).value - f_ed) / f_ed);
            }
        const std::string m = "M=" + std::to_string(M);
        rows.push_back(check_row("gaudin_norm " + m, norm, tol));
        rows.push_back(check_row("slavnov_off_shell " + m, slav, tol));
        rows.push_back(check_row("two_hole_form_factor " + m, ff, tol));
    }
    return {rows, kOk};
}

ItemOutcome suite_densities(const RunConfig& c) {
    const double tol = c.tol_or(1e-8);
    std::mt19937 rng(c.seed);
    std::uniform_real_distribution<double> re(-2.0, 2.0);
    struct B {
        const char* name;
        double a, lo, hi;
    };
    json rows = json::array();
    for (const B b : {B{"rho_half inside", 0.5, -0.45, 0.45}, B{"rho_half outside upper", 0.5, 0.55, 1.5},
                      B{"rho_half outside lower", 0.5, -1.5, -0.55}, B{"rho_1 inside", 1.0, -0.95, 0.95},
                      B{"rho_1 outside upper", 1.0, 1.05, 1.8}, B{"rho_1 outside lower", 1.0, -1.8, -1.05}}) {
        std::uniform_real_distribution<double> im(b.lo, b.hi);
        double worst = 0.0;
        for (int k = 0; k < 25; ++k) worst = std::max(worst, lieb_residual(b.a, re(rng), cplx(re(rng), im(rng)), c.quad()));
        rows.push_back(check_row(b.name, worst, tol));
    }
    return {rows, kOk};
}

ItemOutcome suite_convolutions(const RunConfig& c) {
    const double tol = c.tol_or(1e-8);
    const auto rep = convolution_table_check(c.seed, 10, c.quad(), c.threads);
    json rows = json::array();
    for (const auto& r : rep.rows) {
        json row = check_row(r.name, r.max_error, tol);
        row["draws"] = r.draws;
        row["exact_zero"] = r.exact_zero;
        row["contour_alpha"] = r.contour_alpha;
        rows.push_back(row);
    }
    return {rows, kOk};
}

ItemOutcome suite_hlbe(const RunConfig& c) {
    const double tol = c.tol_or(1e-12);
    std::vector<double> holes{-1.1, -0.4, 0.4, 1.1};
    int n_tilde = 1;
    if (!c.spec.empty()) {
        const json s = load_spec(c);
        holes = s.value("theta", holes);
        n_tilde = s.value("n_tilde", n_tilde);
    }
    const json hl = higher_level_json(holes, n_tilde, tol);
    json rows = json::array();
    for (std::size_t k = 0; k < hl["branches"].size(); ++k) {
        const auto& b = hl["branches"][k];
        rows.push_back(check_row("branch " + std::to_string(k) + " equations", b["residual"].get<double>(), tol));
        rows.push_back(check_row("branch " + std::to_string(k) + " gamma H = D", b["gamma_H_residual"].get<double>(), tol));
    }
    return {rows, kOk};
}

// Closed-form perturbed Cauchy determinants against the direct extraction for
// a two-hole state at M, 1.5M and 2M; the row passes when the deviation falls.
ItemOutcome suite_cauchy(const RunConfig& c) {
    const double tol = c.tol_or(0.1);
    const int M0 = c.M ? c.M : 16;
    json rows = json::array();
    double prev = 1e300;
    bool falling = true;
    for (int M : {M0, 3 * M0 / 2 + (3 * M0 / 2) % 2, 2 * M0}) {
        const auto gs = solve_ground_state(M, c.solve());
        const auto ex = solve_hole_excitation({M, {M / 8, 3 * M / 8}}, c.solve());
        const auto& cls = ex.classification;
        const double g = std::abs((log_det(build_F_g(gs, ex.state, cls)) / log_det(extract_ground(gs, ex.state))).value() - 1.0);
        const double e = std::abs(
            (log_det(build_F_e(ex.state, gs, cls, higher_level_for(cls))) / log_det(extract_excited(ex.state, gs))).value() - 1.0);
        const double d = std::max(g, e);
        falling = falling && d < prev;
        prev = d;
        json row = check_row("M=" + std::to_string(M), d, tol);
        row["F_g_deviation"] = g;
        row["F_e_deviation"] = e;
        rows.push_back(row);
    }
    rows.push_back({{"name", "monotone decrease"}, {"pass", falling}});
    return {rows, kOk};
}

ItemOutcome cmd_verify(const RunConfig& c) {
    ItemOutcome r;
    if (c.suite == "ed") r = suite_ed(c);
    else if (c.suite == "densities") r = suite_densities(c);
    else if (c.suite == "convolutions") r = suite_convolutions(c);
    else if (c.suite == "hlbe") r = suite_hlbe(c);
    else if (c.suite == "cauchy") r = suite_cauchy(c);
    else config_error("unknown suite " + c.suite);
    bool pass = true;
    for (const auto& row : r.value) pass = pass && row["pass"].get<bool>();
    r.value = {{"suite", c.suite}, {"checks", r.value}, {"pass", pass}};
    r.exit = pass ? kOk : kValidation;
    return r;
}

// ------------------------------------------------------------------ output

void flatten(const json& j, const std::string& path, std::vector<std::pair<std::string, std::string>>& out) {
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it) flatten(it.value(), path.empty() ? it.key() : path + "." + it.key(), out);
    } else if (j.is_array()) {
        for (std::size_t k = 0; k < j.size(); ++k) flatten(j[k], path + "[" + std::to_string(k) + "]", out);
    } else {
        out.emplace_back(path, j.is_string() ? j.get<std::string>() : j.dump());
    }
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
}

void emit(const json& report, const std::string& format) {
    if (format == "csv") {
        std::vector<std::pair<std::string, std::string>> rows;
        flatten(report, "", rows);
        std::cout << "path,value\n";
        for (const auto& [p, v] : rows) std::cout << csv_field(p) << ',' << csv_field(v) << '\n';
    } else {
        std::cout << report.dump(2) << '\n';
    }
}

const char* status_of(int code) { return code == kOk ? "ok" : code == kValidation ? "validation_failure" : "failure"; }

}  // namespace

int main(int argc, char** argv) {
    RunConfig cfg;
    CLI::App app{"Form factors of the spin-1/2 XXX chain from determinant representations"};
    app.require_subcommand(1);
    app.add_option("--M", cfg.M, "chain length (even)");
    app.add_option("--spec", cfg.spec, "excitation spec: JSON file or inline JSON");
    app.add_option("--format", cfg.format, "json or csv");
    app.add_option("--tol", cfg.tol, "tolerance for pass/fail checks (command default when omitted)");
    app.add_option("--seed", cfg.seed, "seed for randomized suites");
    app.add_option("--threads", cfg.threads, "worker threads for independent items");
    app.add_option("--bulk-cutoff", cfg.bulk_cutoff, "|theta| above which holes are flagged as outside the bulk");
    app.add_option("--contour-alpha", cfg.contour_alpha, "imaginary shift of the integration contour, in (0, 0.3)");
    app.add_option("--quad-nodes", cfg.quad_nodes, "Gauss-Kronrod rule: 15, 31, 41, 51 or 61");
    app.add_option("--Mstar", cfg.Mstar, "chain length above which string deviations are frozen");

    auto* gs = app.add_subcommand("gs", "ground state roots");
    auto* ex = app.add_subcommand("excite", "solve an excitation spec");
    auto* hl = app.add_subcommand("hlbe", "higher-level equations for a spec or {\"theta\": [...], \"n_tilde\": n}");
    auto* ff = app.add_subcommand("ff-finite", "finite-size determinant form factor");
    ff->add_flag("--compare-ed", cfg.compare_ed, "compare with explicit Bethe vectors (M <= 16)");
    auto* th = app.add_subcommand("ff-thermo", "perturbed Cauchy form factor");
    auto* de = app.add_subcommand("densities", "density rho_a(lambda, mu) on a grid with residuals");
    de->add_option("--a", cfg.a, "kernel width: 0.5 or 1");
    de->add_option("--mu-re", cfg.mu_re, "Re mu");
    de->add_option("--mu-im", cfg.mu_im, "Im mu");
    de->add_option("--points", cfg.points, "grid points in lambda");
    de->add_option("--lambda-max", cfg.lambda_max, "grid spans [-lambda-max, lambda-max]");
    auto* ve = app.add_subcommand("verify", "run a verification suite");
    ve->add_option("--suite", cfg.suite, "ed, densities, convolutions, hlbe or cauchy")->required();
    for (auto* sub : {gs, ex, hl, ff, th, de, ve}) sub->fallthrough();

    json report;
    int code = kOk;
    try {
        try {
            app.parse(argc, argv);
        } catch (const CLI::CallForHelp& e) {
            return app.exit(e);
        } catch (const CLI::ParseError& e) {
            throw Error(ErrorCode::ConfigParse, e.what());
        }
        cfg.command = app.get_subcommands().front()->get_name();
        validate(cfg);
        ItemOutcome r;
        if (cfg.command == "gs") r = cmd_gs(cfg);
        else if (cfg.command == "excite") r = cmd_excite(cfg);
        else if (cfg.command == "hlbe") r = cmd_hlbe(cfg);
        else if (cfg.command == "ff-finite") r = cmd_ff_finite(cfg);
        else if (cfg.command == "ff-thermo") r = cmd_ff_thermo(cfg);
        else if (cfg.command == "densities") r = cmd_densities(cfg);
        else r = cmd_verify(cfg);
        report["result"] = r.value;
        code = r.exit;
    } catch (const Error& e) {
        report["error"] = {{"code", to_string(e.code())}, {"message", e.what()}};
        code = kFailure;
    } catch (const std::exception& e) {
        report["error"] = {{"code", "Internal"}, {"message", e.what()}};
        code = kFailure;
    }
    report["command"] = cfg.command;
    report["config"] = config_json(cfg);
    report["status"] = status_of(code);
    report["schema_version"] = 1;
    emit(report, cfg.format == "csv" ? "csv" : "json");
    return code;
}
