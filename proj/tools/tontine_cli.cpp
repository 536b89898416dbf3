// tontine: command-line driver for the stability experiments.
//
// Every subcommand writes one CSV (--out, or stdout) plus a JSON manifest next
// to it (<out>.manifest.json) recording the inputs, the seed and the build.
// The manifest leaves out --threads on purpose: the thread count never changes
// the numbers.

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/version.hpp>

#include "CLI11.hpp"
#include "json.hpp"
#include "tontine/tontine.hpp"

using namespace tontine;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "1.0.0";
constexpr std::uint64_t kDefaultSeed = 42;

std::string num(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

struct Common {
    std::uint64_t seed = kDefaultSeed;
    unsigned threads = 0;
    std::string out;
};

struct TableOpts {
    std::string path;
    double b = 0.00003;
    double c = 1.1;
};

struct FundOpts {
    int age = 70;
    double wealth = 100000.0;
    double annual_rate = 0.0;
    int ppy = 12;
};

struct CriterionOpts {
    double eps = 0.1;
    std::optional<double> eps_upper;
    bool symmetric = false;
    double beta = 0.9;

    StabilityCriterion make() const {
        StabilityCriterion c{eps, eps_upper, beta};
        if (symmetric && !eps_upper) c.eps_upper = eps;
        c.validate();
        return c;
    }
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--seed", c.seed, "master seed (default 42, or $TONTINE_SEED)");
    cmd->add_option("--threads", c.threads, "worker threads, 0 = all cores")->default_val(0);
    cmd->add_option("--out", c.out, "CSV output path (stdout when omitted)");
}

void add_table(CLI::App* cmd, TableOpts& t) {
    cmd->add_option("--table", t.path, "life table CSV with header age,qx");
    cmd->add_option("--b", t.b, "Gompertz level when no table is given")->default_val(t.b);
    cmd->add_option("--c", t.c, "Gompertz growth when no table is given")->default_val(t.c);
}

void add_fund(CLI::App* cmd, FundOpts& f) {
    cmd->add_option("--age", f.age, "entry age")->default_val(f.age);
    cmd->add_option("--wealth", f.wealth, "initial wealth per member")->default_val(f.wealth);
    cmd->add_option("--rate", f.annual_rate, "annual interest rate")->default_val(f.annual_rate);
    cmd->add_option("--ppy", f.ppy, "payments per year")->default_val(f.ppy);
}

void add_criterion(CLI::App* cmd, CriterionOpts& c) {
    cmd->add_option("--eps", c.eps, "lower threshold")->default_val(c.eps);
    cmd->add_option("--eps-upper", c.eps_upper, "upper threshold (none when omitted)");
    cmd->add_flag("--symmetric", c.symmetric, "use --eps for the upper threshold too");
    cmd->add_option("--beta", c.beta, "certainty level")->default_val(c.beta);
}

json criterion_json(const StabilityCriterion& c) {
    json j;
    j["eps_lower"] = c.eps_lower;
    j["eps_upper"] = c.eps_upper ? json(*c.eps_upper) : json(nullptr);
    j["beta"] = c.beta;
    return j;
}

json table_json(const TableOpts& t) {
    if (!t.path.empty()) return json{{"path", t.path}};
    return json{{"law", "gompertz"}, {"b", t.b}, {"c", t.c}, {"min_age", 0}, {"max_age", 120}};
}

json fund_json(const FundOpts& f) {
    return json{{"entry_age", f.age}, {"initial_wealth", f.wealth}, {"annual_rate", f.annual_rate},
                {"periods_per_year", f.ppy}};
}

LifeTable load_table(const TableOpts& t) {
    if (t.path.empty()) return gompertz_table(t.b, t.c, 0, 120);
    std::ifstream in(t.path, std::ios::binary);
    if (!in) throw IoError("cannot open life table " + t.path);
    auto loaded = load_life_table(in);
    if (loaded.report.terminal_coerced) std::cerr << "note: last q coerced to 1\n";
    if (loaded.report.terminal_appended) std::cerr << "note: terminal row with q = 1 appended\n";
    return std::move(loaded.table);
}

FundParams fund_params(const FundOpts& f, int n) {
    require(f.ppy >= 1, "payments per year must be positive");
    require(f.annual_rate > -1.0, "annual rate must exceed -1");
    FundParams p;
    p.n_members = n;
    p.entry_age = f.age;
    p.initial_wealth = f.wealth;
    p.rate_per_period = std::pow(1.0 + f.annual_rate, 1.0 / f.ppy) - 1.0;
    p.periods_per_year = f.ppy;
    p.validate();
    return p;
}

json report_json(const StabilityReport& r) {
    json j;
    j["k"] = r.k_value;
    j["mode"] = std::string(to_string(r.mode));
    j["n"] = r.n;
    j["criterion"] = criterion_json(r.criterion);
    j["paths"] = r.n_paths;
    j["seed"] = r.seed;
    j["tail_probability"] = r.tail_probability;
    j["ci99_half_width"] = r.ci99_half_width;
    return j;
}

// Writes the CSV body and, when it goes to a file, the manifest beside it.
void emit(const Common& common, const std::string& command, json inputs, const std::string& csv,
          json results = json::object()) {
    if (common.out.empty()) {
        std::cout << csv;
        return;
    }
    {
        std::ofstream out(common.out, std::ios::binary);
        if (!out) throw IoError("cannot write " + common.out);
        out << csv;
        if (!out) throw IoError("write failed for " + common.out);
    }
    json manifest;
    manifest["command"] = command;
    manifest["inputs"] = std::move(inputs);
    manifest["seed"] = common.seed;
    manifest["output"] = common.out;
    if (!results.empty()) manifest["results"] = std::move(results);
    manifest["versions"] = {{"tontine", kVersion},
                            {"compiler", __VERSION__},
                            {"boost", BOOST_LIB_VERSION},
                            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
    const std::string path = common.out + ".manifest.json";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << manifest.dump(2) << '\n';
    if (!out) throw IoError("write failed for " + path);
}

std::string distribution_csv(const KDistribution& d) {
    std::ostringstream s;
    write_distribution(s, d);
    return s.str();
}

int k_u_for(int n, const StabilityCriterion& crit, std::uint64_t paths, const Common& c) {
    return estimate_k_u(n, crit, paths, c.seed, c.threads).report.k_value;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Income stability of pooled annuity funds"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    Common common;
    if (const char* env = std::getenv("TONTINE_SEED")) {
        try {
            common.seed = std::stoull(env);
        } catch (const std::exception&) {
            std::cerr << "error: TONTINE_SEED must be a non-negative integer\n";
            return 1;
        }
    }
    TableOpts table;
    FundOpts fund;
    CriterionOpts crit;
    int n = 1000;
    std::vector<int> n_list{100, 200, 500, 1000, 2000, 5000, 10000};
    std::uint64_t paths = 100000;

    auto* ku = app.add_subcommand("ku", "quantile k_U from uniform order statistics");
    add_common(ku, common);
    add_criterion(ku, crit);
    ku->add_option("--n", n, "initial members")->default_val(n);
    ku->add_option("--paths", paths, "Monte Carlo paths")->default_val(paths);

    auto* kc = app.add_subcommand("kc", "quantile k_C from simulated income paths");
    add_common(kc, common);
    add_criterion(kc, crit);
    add_table(kc, table);
    add_fund(kc, fund);
    kc->add_option("--n", n, "initial members")->default_val(n);
    kc->add_option("--paths", paths, "Monte Carlo paths")->default_val(paths);

    auto* compare = app.add_subcommand("compare", "k_U against k_C over a grid of fund sizes");
    add_common(compare, common);
    add_criterion(compare, crit);
    add_table(compare, table);
    add_fund(compare, fund);
    compare->add_option("--n-list", n_list, "fund sizes")->delimiter(',');
    compare->add_option("--paths", paths, "Monte Carlo paths")->default_val(paths);

    auto* likely = app.add_subcommand("likely-time", "likely time of the k_U-th death over fund sizes");
    add_common(likely, common);
    add_criterion(likely, crit);
    add_table(likely, table);
    likely->add_option("--age", fund.age, "entry age")->default_val(fund.age);
    likely->add_option("--n-list", n_list, "fund sizes")->delimiter(',');
    likely->add_option("--paths", paths, "Monte Carlo paths")->default_val(paths);

    std::optional<int> spread_k;
    double d_max = 3.0;
    double d_step = 0.05;
    auto* spread = app.add_subcommand("spread", "P[T_(k) <= likely time - d] over a grid of d");
    add_common(spread, common);
    add_criterion(spread, crit);
    add_table(spread, table);
    spread->add_option("--age", fund.age, "entry age")->default_val(fund.age);
    spread->add_option("--n", n, "initial members")->default_val(n);
    spread->add_option("--k", spread_k, "death count (k_U estimate when omitted)");
    spread->add_option("--paths", paths, "Monte Carlo paths for k_U")->default_val(paths);
    spread->add_option("--d-max", d_max, "largest shift in years")->default_val(d_max);
    spread->add_option("--d-step", d_step, "shift increment in years")->default_val(d_step);

    std::uint64_t mc_paths = 0;
    std::uint64_t psi_paths = 0;
    int steps = 10000;
    auto* approx = app.add_subcommand("approx", "closed-form and Brownian approximations to k_U");
    add_common(approx, common);
    add_criterion(approx, crit);
    approx->add_option("--n-list", n_list, "fund sizes")->delimiter(',');
    approx->add_option("--mc-paths", mc_paths, "paths for the Monte Carlo k_U column, 0 to skip")
        ->default_val(mc_paths);
    approx->add_option("--psi-paths", psi_paths, "Brownian paths for the Psi column, 0 to skip")
        ->default_val(psi_paths);
    approx->add_option("--steps", steps, "Euler steps per unit horizon")->default_val(steps);

    std::uint64_t table1_paths = 1000000;
    auto* table1 = app.add_subcommand("table1", "k_U grid over fund sizes, thresholds and certainty levels");
    add_common(table1, common);
    table1->add_option("--paths", table1_paths, "Monte Carlo paths")->default_val(table1_paths);

    int min_age = 0;
    int max_age = 120;
    std::string law = "gompertz";
    auto* gen = app.add_subcommand("gen-table", "write a synthetic life table");
    add_common(gen, common);
    gen->add_option("--law", law, "mortality law")->check(CLI::IsMember({"gompertz"}))->default_val(law);
    gen->add_option("--b", table.b, "Gompertz level")->default_val(table.b);
    gen->add_option("--c", table.c, "Gompertz growth")->default_val(table.c);
    gen->add_option("--min-age", min_age, "first age")->default_val(min_age);
    gen->add_option("--max-age", max_age, "last age, where q = 1")->default_val(max_age);

    auto* trace = app.add_subcommand("trace", "one simulated income path");
    add_common(trace, common);
    add_table(trace, table);
    add_fund(trace, fund);
    trace->add_option("--n", n, "initial members")->default_val(n);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*ku) {
            const auto c = crit.make();
            const auto est = estimate_k_u(n, c, paths, common.seed, common.threads);
            const json report = report_json(est.report);
            std::cout << report.dump(2) << '\n';
            if (!common.out.empty()) {
                emit(common, "ku", {{"n", n}, {"criterion", criterion_json(c)}, {"paths", paths}},
                     distribution_csv(est.distribution), report);
            }
        } else if (*kc) {
            const auto c = crit.make();
            const auto lt = load_table(table);
            const auto est = estimate_k_c(fund_params(fund, n), lt, c, paths, common.seed, common.threads);
            const json report = report_json(est.report);
            std::cout << report.dump(2) << '\n';
            if (!common.out.empty()) {
                emit(common, "kc",
                     {{"n", n}, {"criterion", criterion_json(c)}, {"paths", paths}, {"table", table_json(table)},
                      {"fund", fund_json(fund)}},
                     distribution_csv(est.distribution), report);
            }
        } else if (*compare) {
            const auto c = crit.make();
            const auto lt = load_table(table);
            std::ostringstream csv;
            csv << "n,k_u,k_c,rel_diff,time_diff_months\n";
            for (const int size : n_list) {
                const int k_u = k_u_for(size, c, paths, common);
                const int k_c =
                    estimate_k_c(fund_params(fund, size), lt, c, paths, common.seed, common.threads).report.k_value;
                csv << size << ',' << k_u << ',' << k_c << ',';
                csv << (k_u >= 1 ? num(relative_difference(k_c, k_u)) : "") << ',';
                csv << (k_c < size && k_u < size ? num(time_difference_months(lt, fund.age, size, k_c, k_u)) : "");
                csv << '\n';
            }
            emit(common, "compare",
                 {{"n_list", n_list}, {"criterion", criterion_json(c)}, {"paths", paths}, {"table", table_json(table)},
                  {"fund", fund_json(fund)}},
                 csv.str());
        } else if (*likely) {
            const auto c = crit.make();
            const auto lt = load_table(table);
            std::ostringstream csv;
            csv << "n,likely_time_years\n";
            for (const int size : n_list) {
                const int k_u = k_u_for(size, c, paths, common);
                csv << size << ',' << (k_u < size ? num(likely_time(lt, fund.age, size, k_u)) : "") << '\n';
            }
            emit(common, "likely-time",
                 {{"n_list", n_list}, {"criterion", criterion_json(c)}, {"paths", paths}, {"table", table_json(table)},
                  {"entry_age", fund.age}},
                 csv.str());
        } else if (*spread) {
            require(d_step > 0.0 && d_max >= 0.0, "need d-step > 0 and d-max >= 0");
            const auto c = crit.make();
            const auto lt = load_table(table);
            const int k = spread_k ? *spread_k : k_u_for(n, c, paths, common);
            require(k >= 1 && k < n, "k must lie in 1..N-1");
            std::ostringstream csv;
            csv << "d,probability\n";
            const auto count = static_cast<long long>(std::floor(d_max / d_step + 1e-9));
            for (long long j = 0; j <= count; ++j) {
                const double d = static_cast<double>(j) * d_step;
                csv << num(d) << ',' << num(death_time_spread(lt, fund.age, n, k, d)) << '\n';
            }
            json inputs{{"n", n}, {"k", k}, {"table", table_json(table)}, {"entry_age", fund.age},
                        {"d_max", d_max}, {"d_step", d_step}};
            if (!spread_k) {
                inputs["criterion"] = criterion_json(c);
                inputs["paths"] = paths;
            }
            emit(common, "spread", inputs, csv.str());
        } else if (*approx) {
            const auto c = crit.make();
            std::ostringstream csv;
            csv << "n,k_approx,k_psi,k_u,rel_error\n";
            for (const int size : n_list) {
                const int k_approx = approx_k_u(size, c.eps_lower, c.beta);
                csv << size << ',' << k_approx << ',';
                if (psi_paths > 0) {
                    const auto two = approx_k_u_two_sided(ApproxInputs{size, c.eps_lower, c.eps_upper, c.beta},
                                                          psi_paths, steps, common.seed, common.threads);
                    csv << two.k;
                }
                csv << ',';
                if (mc_paths > 0) {
                    const int k_u = k_u_for(size, c, mc_paths, common);
                    csv << k_u << ',';
                    if (k_u < size) csv << num(static_cast<double>(k_approx - k_u) / (size - k_u));
                } else {
                    csv << ',';
                }
                csv << '\n';
            }
            emit(common, "approx",
                 {{"n_list", n_list}, {"criterion", criterion_json(c)}, {"mc_paths", mc_paths},
                  {"psi_paths", psi_paths}, {"steps_per_unit", steps}},
                 csv.str());
        } else if (*table1) {
            const std::vector<int> sizes{100, 200, 500, 1000, 2000, 3000, 4000, 5000, 6000, 7000, 8000, 9000, 10000};
            // Column order: eps in {0.1, 0.05}, then beta in {0.9, 0.99}, then above / both.
            const std::array criteria{StabilityCriterion::lower_only(0.1, 0.9), StabilityCriterion::symmetric(0.1, 0.9),
                                      StabilityCriterion::lower_only(0.05, 0.9),
                                      StabilityCriterion::symmetric(0.05, 0.9)};
            std::ostringstream csv;
            csv << "n";
            for (const char* e : {"0.1", "0.05"}) {
                for (const char* b : {"0.9", "0.99"}) {
                    for (const char* side : {"above", "both"}) csv << ",eps" << e << "_beta" << b << '_' << side;
                }
            }
            csv << '\n';
            for (const int size : sizes) {
                const auto dists = sample_k_u(size, criteria, table1_paths, common.seed, common.threads);
                csv << size;
                for (const int e : {0, 2}) {
                    for (const double b : {0.9, 0.99}) {
                        csv << ',' << dists[static_cast<std::size_t>(e)].quantile(b);
                        csv << ',' << dists[static_cast<std::size_t>(e) + 1].quantile(b);
                    }
                }
                csv << '\n';
            }
            emit(common, "table1", {{"n_list", sizes}, {"paths", table1_paths}}, csv.str());
        } else if (*gen) {
            const auto lt = gompertz_table(table.b, table.c, min_age, max_age);
            std::ostringstream csv;
            write_life_table(csv, lt);
            emit(common, "gen-table",
                 {{"law", law}, {"b", table.b}, {"c", table.c}, {"min_age", min_age}, {"max_age", max_age}},
                 csv.str());
        } else if (*trace) {
            const auto lt = load_table(table);
            Rng rng = Rng::for_stream(common.seed, 0);
            const auto path = simulate_income_path(fund_params(fund, n), lt, rng);
            std::ostringstream csv;
            write_trace(csv, path);
            emit(common, "trace", {{"n", n}, {"table", table_json(table)}, {"fund", fund_json(fund)}}, csv.str());
        }
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const ConvergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
