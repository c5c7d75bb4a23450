// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            criteria 1-5 and 7-9
//   acceptance --only N   a single criterion (6 is only run this way or with --slow)
//   acceptance --slow     everything including criterion 6

#include "nlgranger/harness.hpp"
#include "support.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>

using namespace nlgranger;
using namespace nlgranger::testing;

namespace {

constexpr std::uint64_t kSeed = 1;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

// Every objective trace seen by the suite, for criterion 4.
struct TraceLog {
    int traces = 0;
    int violations = 0;
    double worst = 0.0;

    void add(const std::vector<double>& trace) {
        ++traces;
        for (std::size_t i = 1; i < trace.size(); ++i) {
            const double rise = trace[i] - trace[i - 1];
            worst = std::max(worst, rise / std::max(1.0, std::abs(trace[i - 1])));
            if (rise > 1e-12 * std::max(1.0, std::abs(trace[i - 1]))) ++violations;
        }
    }
};

TraceLog g_traces;

std::string fmt(double v, int precision = 4) {
    std::ostringstream ss;
    ss << std::setprecision(precision) << v;
    return ss.str();
}

// Criterion 1 --------------------------------------------------------------

Outcome solver_oracle() {
    const auto start = Clock::now();
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<int> rows(4, 12), groups(1, 4), width(1, 3);
    std::uniform_real_distribution<double> frac(0.05, 0.8);
    double worst_weight = 0.0, worst_gap = 0.0;
    for (int trial = 0; trial < 25; ++trial) {
        const int n = rows(rng);
        const int l = groups(rng);
        std::vector<Matrix> blocks;
        int total = 0;
        for (int g = 0; g < l; ++g) {
            const int w = std::min(width(rng), std::max(1, n - 2 - total));
            blocks.push_back(random_matrix(rng, n, w));
            total += w;
        }
        const Vector y = random_vector(rng, n);
        double top = 0.0;
        for (const auto& b : blocks) top = std::max(top, (2.0 * b.transpose() * y).norm());
        const double kappa = frac(rng) * top;
        const GroupedProblem problem = GroupedProblem::from_blocks(blocks, y, kappa);
        const GroupedSolution sol = solve_group_lasso(problem, std::nullopt, tight_solver());
        g_traces.add(sol.objective_trace);
        const auto oracle = CoordinateDescentOracle{blocks, y, kappa}.solve();
        for (std::size_t g = 0; g < blocks.size(); ++g)
            worst_weight = std::max(worst_weight, (sol.group(g) - oracle[g]).cwiseAbs().maxCoeff());
        worst_gap = std::max(worst_gap, optimality_gap(problem, sol.weights) / kappa);
    }
    const double secs = seconds_since(start);
    return {worst_weight <= 1e-6 && worst_gap <= 1e-4 && secs < 10.0,
            "max |w - w_oracle| " + fmt(worst_weight, 3) + " (<= 1e-6), max gap/kappa " + fmt(worst_gap, 3) +
                " (<= 1e-4), " + fmt(secs, 3) + " s (< 10)"};
}

// Criteria 2 and 3 -----------------------------------------------------------

struct NvarInstance {
    SupervisedSet train;
    GramStack grams;
    FeatureStack features;
    double lambda;
};

NvarInstance nvar_instance(int trial) {
    std::mt19937_64 rng(200 + static_cast<std::uint64_t>(trial));
    std::uniform_int_distribution<int> length(25, 50), lag(1, 3);
    std::uniform_real_distribution<double> exponent(-2.0, 1.0);
    NvarInstance inst;
    inst.train = synthetic_train(length(rng), 300 + static_cast<std::uint64_t>(trial), lag(rng));
    inst.grams = build_gram_stack(partitioned_specs(default_dictionary(), inst.train.dim()), inst.train.inputs,
                                  inst.train.partition_map);
    inst.features = build_feature_stack(inst.grams);
    inst.lambda = std::pow(10.0, exponent(rng));
    return inst;
}

double system_residual(const GramStack& grams, const Vector& a, const Vector& c, const Vector& y, double lambda) {
    Matrix system = combined_gram(grams, a);
    system.diagonal().array() += lambda;
    return (system * c - y).norm() / y.norm();
}

double g_worst_residual = 0.0;
int g_residual_checks = 0;

Outcome closed_form() {
    const auto start = Clock::now();
    double worst_closed = 0.0, worst_repr = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const NvarInstance inst = nvar_instance(trial);
        for (Index s = 0; s < inst.train.dim(); ++s) {
            const Vector y = inst.train.outputs.col(s);
            const TaskSolution sol =
                solve_task_l1(inst.features, inst.grams, y, inst.lambda, std::nullopt, tight_solver());
            g_traces.add(sol.objective_trace);
            Vector feature_fit = Vector::Zero(y.size());
            for (std::size_t d = 0; d < inst.features.size(); ++d) {
                const auto zd = sol.z->segment(inst.features.offsets[d], inst.features.rank(d));
                worst_closed = std::max(worst_closed,
                                        std::abs(sol.a(static_cast<Index>(d)) - std::sqrt(inst.lambda) * zd.norm()));
                feature_fit += inst.features.block(d) * zd;
            }
            const Vector kernel_fit = combined_gram(inst.grams, sol.a) * sol.c;
            worst_repr = std::max(worst_repr, (feature_fit - kernel_fit).norm() / y.norm());
            g_worst_residual = std::max(g_worst_residual, system_residual(inst.grams, sol.a, sol.c, y, inst.lambda));
            ++g_residual_checks;
        }
    }
    const double secs = seconds_since(start);
    return {worst_closed <= 1e-10 && worst_repr <= 1e-6 && secs < 10.0,
            "max |a_d - sqrt(lambda)|z_d|| " + fmt(worst_closed, 3) + " (<= 1e-10), max |feature - kernel fit|/|y| " +
                fmt(worst_repr, 3) + " (<= 1e-6), " + fmt(secs, 3) + " s (< 10)"};
}

Outcome coefficient_residual() {
    std::mt19937_64 rng(400);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst_cg = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        const NvarInstance inst = nvar_instance(20 + trial);
        Vector a(static_cast<Index>(inst.grams.size()));
        for (Index d = 0; d < a.size(); ++d) a(d) = unit(rng) < 0.4 ? 0.0 : unit(rng);
        const Vector y = inst.train.outputs.col(trial % inst.train.dim());
        const Vector c = solve_coefficients(inst.grams, a, y, inst.lambda);
        g_worst_residual = std::max(g_worst_residual, system_residual(inst.grams, a, c, y, inst.lambda));
        ++g_residual_checks;
        Matrix system = combined_gram(inst.grams, a);
        system.diagonal().array() += inst.lambda;
        const Vector cg = conjugate_gradient(system, y);
        worst_cg = std::max(worst_cg, (c - cg).norm() / cg.norm());
    }
    // The l1/l2 outer loop solves the system on every iteration.
    for (int trial = 0; trial < 5; ++trial) {
        const NvarInstance inst = nvar_instance(40 + trial);
        const Vector y = inst.train.outputs.col(0);
        const TaskSolution sol = solve_task_l12(inst.grams, y, inst.lambda);
        g_traces.add(sol.objective_trace);
        g_worst_residual = std::max(g_worst_residual, system_residual(inst.grams, sol.a, sol.c, y, inst.lambda));
        ++g_residual_checks;
    }
    return {g_worst_residual <= 1e-8 && worst_cg <= 1e-8,
            "max residual/|y| " + fmt(g_worst_residual, 3) + " over " + std::to_string(g_residual_checks) +
                " solves (<= 1e-8), max rel gap to CG " + fmt(worst_cg, 3)};
}

// Criterion 4 ---------------------------------------------------------------

Outcome monotone_descent() {
    // Extra solves beyond those recorded by criteria 1-3: plain ISTA, the
    // nonnegative variant, warm-started l1 paths and l1/l2 outer loops.
    std::mt19937_64 rng(500);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix B = random_matrix(rng, 12, 6);
        const Vector y = random_vector(rng, 12);
        for (bool accelerate : {false, true})
            for (bool nonneg : {false, true}) {
                SolverOptions opts;
                opts.accelerate = accelerate;
                opts.nonneg = nonneg;
                GroupedProblem p = GroupedProblem::from_blocks({B.leftCols(2), B.middleCols(2, 3), B.rightCols(1)},
                                                               y, 0.3 * (2.0 * B.transpose() * y).norm());
                g_traces.add(solve_group_lasso(p, 2.0 * random_vector(rng, 6), opts).objective_trace);
            }
    }
    for (int trial = 0; trial < 4; ++trial) {
        const NvarInstance inst = nvar_instance(60 + trial);
        const auto grid = lambda_grid(GridSpec{6, -2.0, 2.0, std::nullopt}, inst.train.size(),
                                      static_cast<Index>(inst.grams.size()));
        std::optional<TaskSolution> warm_l1, warm_l12;
        for (std::size_t k = grid.size(); k-- > 0;) {
            const Vector y = inst.train.outputs.col(1);
            warm_l1 = solve_task_l1(inst.features, inst.grams, y, grid[k], warm_l1);
            g_traces.add(warm_l1->objective_trace);
            warm_l12 = solve_task_l12(inst.grams, y, grid[k], warm_l12);
            g_traces.add(warm_l12->objective_trace);
        }
    }
    return {g_traces.violations == 0,
            std::to_string(g_traces.violations) + " violations in " + std::to_string(g_traces.traces) +
                " traces, worst relative rise " + fmt(g_traces.worst, 3) + " (slack 1e-12)"};
}

// Criteria 5-7 --------------------------------------------------------------

ExperimentConfig synthetic_experiment(Index train, std::vector<Method> methods) {
    ExperimentConfig config;
    SyntheticSpec spec;
    spec.psi = SyntheticSpec::default_psi();
    spec.seed = kSeed;
    config.data.synthetic = spec;
    config.train = train;
    config.holdout = 500;
    config.methods = std::move(methods);
    return config;
}

const MethodResult& require(const ExperimentReport& report, Method method) {
    const MethodResult* r = report.find(method);
    if (!r || !r->ok)
        throw std::runtime_error(to_string(method) + " failed: " + (r ? r->error : std::string("missing")));
    return *r;
}

Outcome forecasting_order() {
    const ExperimentReport report =
        run_experiment(synthetic_experiment(1000, {Method::Mean, Method::Lvarl2, Method::Nvarl1}));
    const auto& mean = require(report, Method::Mean);
    const auto& lvar = require(report, Method::Lvarl2);
    const auto& nvarl1 = require(report, Method::Nvarl1);
    const double mm = mean.report.mse, ml = lvar.report.mse, mn = nvarl1.report.mse;
    const bool pass = mm >= 0.83 && mm <= 1.02 && mn < ml && mn < mm && mn >= 0.62 && mn <= 0.74 &&
                      nvarl1.seconds < 600.0;
    return {pass, "Mean " + fmt(mm) + " in [0.83,1.02]; NVARL1 " + fmt(mn) + " in [0.62,0.74]; LVAR " + fmt(ml) +
                      "; NVARL1 < LVAR and < Mean; NVARL1 cv+fit " + fmt(nvarl1.seconds, 4) + " s (< 600)"};
}

Outcome larger_sample() {
    const auto start = Clock::now();
    const ExperimentReport report = run_experiment(synthetic_experiment(3000, {Method::Lvarl1, Method::Nvarl1}));
    const double secs = seconds_since(start);
    const double l1 = require(report, Method::Lvarl1).report.mse;
    const double n1 = require(report, Method::Nvarl1).report.mse;
    const bool pass = n1 >= 0.576 && n1 <= 0.676 && n1 <= 0.95 * l1 && secs < 45.0 * 60.0;
    return {pass, "NVARL1 " + fmt(n1) + " in [0.576,0.676]; LVARL1 " + fmt(l1) + "; ratio " + fmt(n1 / l1) +
                      " (<= 0.95); " + fmt(secs, 4) + " s (< 2700)"};
}

double cross_block_share(const AdjacencyMatrix& adj) {
    const std::set<Index> first{0, 1, 2};
    double cross = 0.0;
    for (Index i = 0; i < adj.values.rows(); ++i)
        for (Index j = 0; j < adj.values.cols(); ++j)
            if (first.count(i) != first.count(j)) cross += adj.values(i, j);
    const double total = adj.values.sum();
    return total > 0.0 ? cross / total : 0.0;
}

Outcome structure_recovery() {
    // NVARL1 and LVARL1 are cross-validated. NVARL12 reuses the NVARL1 choice.
    const ExperimentReport cv_report = run_experiment(synthetic_experiment(2000, {Method::Lvarl1, Method::Nvarl1}));
    const double lambda = require(cv_report, Method::Nvarl1).report.lambda;
    ExperimentConfig config = synthetic_experiment(2000, {Method::Nvarl12});
    config.fixed_lambda = {{Method::Nvarl12, lambda}};
    ExperimentReport report = run_experiment(config);
    report.results.insert(report.results.begin(), cv_report.results.begin(), cv_report.results.end());
    bool pass = true;
    std::string detail;
    for (Method m : {Method::Lvarl1, Method::Nvarl1, Method::Nvarl12}) {
        const auto& r = require(report, m);
        const AdjacencyMatrix& adj = *r.adjacency;
        const double share = cross_block_share(adj);
        int zeros = 0;
        for (Index i = 0; i < 5; ++i)
            for (Index j = 0; j < 5; ++j)
                if ((i < 3) != (j < 3) && adj.values(i, j) == 0.0) ++zeros;
        pass = pass && share < 0.05;
        detail += to_string(m) + " " + fmt(100.0 * share, 3) + "% (" + std::to_string(zeros) + "/12 zero, lambda " +
                  fmt(r.report.lambda) + ", mse " + fmt(r.report.mse) + ", " + fmt(r.seconds, 4) + " s); ";
    }
    return {pass, detail + "all < 5%"};
}

// Criterion 8 ---------------------------------------------------------------

Outcome generator_moments() {
    SyntheticSpec spec;
    spec.psi = SyntheticSpec::default_psi();
    spec.length = 1000000;
    spec.seed = kSeed;
    const auto s = generate_synthetic(spec);
    const Vector expected = (Vector(5) << 3.18, 3.61, 4.5716, 3.32, 2.94).finished();
    const Vector mean = s.values.colwise().mean();
    const Matrix centered = s.values.rowwise() - mean.transpose();
    const double n = static_cast<double>(s.length());
    double worst_var = 0.0;
    for (Index j = 0; j < 5; ++j) {
        const double var = centered.col(j).squaredNorm() / (n - 1.0);
        worst_var = std::max(worst_var, std::abs(var / expected(j) - 1.0));
    }
    const Matrix lag1 = centered.bottomRows(s.length() - 1).transpose() * centered.topRows(s.length() - 1) / (n - 1.0);
    double worst_cross = 0.0;
    for (Index i = 0; i < 5; ++i)
        for (Index j = 0; j < 5; ++j)
            if ((i < 3) != (j < 3)) worst_cross = std::max(worst_cross, std::abs(lag1(i, j)));
    return {worst_var <= 0.02 && worst_cross <= 0.02,
            "max relative variance error " + fmt(100.0 * worst_var, 3) + "% (<= 2%), max |cross-block lag-1 cov| " +
                fmt(worst_cross, 3) + " (<= 0.02)"};
}

// Criterion 9 ---------------------------------------------------------------

Outcome property_suite() {
    std::string list = NLGRANGER_PROPERTY_BINARIES;
    std::vector<std::string> binaries;
    std::stringstream ss(list);
    for (std::string item; std::getline(ss, item, '|');)
        if (!item.empty()) binaries.push_back(item);
    int failed = 0;
    std::string detail;
    for (const auto& bin : binaries) {
        const std::string cmd = "\"" + bin + "\" --minimal > /dev/null 2>&1";
        const int rc = std::system(cmd.c_str());
        const auto slash = bin.find_last_of('/');
        const std::string name = slash == std::string::npos ? bin : bin.substr(slash + 1);
        if (rc != 0) {
            ++failed;
            detail += name + " FAILED; ";
        }
    }
    return {failed == 0 && !binaries.empty(),
            std::to_string(binaries.size() - static_cast<std::size_t>(failed)) + "/" +
                std::to_string(binaries.size()) + " property/unit binaries green. " + detail};
}

struct Criterion {
    int id;
    std::string title;
    Outcome (*run)();
    bool slow;
};

} // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    bool slow = false;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--slow") slow = true;
        else if (arg == "--only" && i + 1 < argc) only.insert(std::atoi(argv[++i]));
        else {
            std::cerr << "usage: acceptance [--slow] [--only N]...\n";
            return 2;
        }
    }
    const std::vector<Criterion> criteria{
        {1, "solver matches coordinate-descent oracle", solver_oracle, false},
        {2, "NVARL1 closed form and representer equivalence", closed_form, false},
        {3, "coefficient system residual and CG oracle", coefficient_residual, false},
        {4, "monotone objective traces", monotone_descent, false},
        {5, "synthetic forecasting order at n_train=1000", forecasting_order, false},
        {6, "larger-sample gap at n_train=3000", larger_sample, true},
        {7, "Granger structure recovery at n_train=2000", structure_recovery, false},
        {8, "generator MA(1) moments over 1e6 steps", generator_moments, false},
        {9, "property suite green", property_suite, false},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        if (!only.empty() ? !only.count(c.id) : (c.slow && !slow)) continue;
        // Criterion 4 audits the traces produced by 1-3, so run those first when selected alone.
        if (c.id == 4 && !only.empty() && g_traces.traces == 0) {
            solver_oracle();
            closed_form();
            coefficient_residual();
        }
        const auto start = Clock::now();
        Outcome outcome;
        try {
            outcome = c.run();
        } catch (const std::exception& e) {
            outcome = {false, std::string("error: ") + e.what()};
        }
        if (!outcome.pass) ++failures;
        std::cout << (outcome.pass ? "PASS" : "FAIL") << "  criterion " << c.id << ": " << c.title << " | "
                  << outcome.detail << " [" << fmt(seconds_since(start), 4) << " s]" << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
