#pragma once

#include "certsum/pslq.hpp"
#include "certsum/report.hpp"

#include <atomic>
#include <condition_variable>
#include <functional>
#include <thread>

namespace certsum {

struct RunConfig {
    std::string registry_path;
    int digits = 30;
    long prime_min = 3;
    long prime_max = 100;
    CongruenceStrategy strategy = CongruenceStrategy::ExactRational;
    bool auto_strategy = true;
    int parallelism = 1;
    std::string cache_dir;
    std::string format = "json"; // json | markdown | csv
    std::vector<std::string> id_filters;
    SumOptions sum;

    void validate() const {
        if (digits < 10) throw std::invalid_argument("digits must be >= 10");
        if (prime_min > prime_max) throw std::invalid_argument("empty prime range");
        if (parallelism < 1) throw std::invalid_argument("parallelism must be >= 1");
        if (format != "json" && format != "markdown" && format != "csv")
            throw std::invalid_argument("format must be json|markdown|csv");
    }

    Json to_json() const {
        return Json{{"registry", registry_path}, {"digits", digits},
                    {"prime_min", prime_min},   {"prime_max", prime_max},
                    {"strategy", strategy_name(strategy)}, {"parallelism", parallelism},
                    {"format", format}};
    }
};

// Run a fixed set of independent jobs on `threads` workers; results land in
// a pre-sized vector so aggregation order is deterministic regardless of
// scheduling.
inline void parallel_for(size_t jobs, int threads, const std::function<void(size_t)>& body) {
    if (threads <= 1 || jobs <= 1) {
        for (size_t i = 0; i < jobs; ++i) body(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    int n = std::min<int>(threads, static_cast<int>(jobs));
    std::exception_ptr err = nullptr;
    std::mutex err_mu;
    for (int t = 0; t < n; ++t) {
        pool.emplace_back([&]() {
            for (;;) {
                size_t i = next.fetch_add(1);
                if (i >= jobs) return;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mu);
                    if (!err) err = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

// Expand gc-tagged rational series into derived template records.
inline std::vector<ConjectureRecord> derived_records(const Registry& reg) {
    std::vector<ConjectureRecord> out;
    for (auto& r : reg.records) {
        if (r.family == 0 || r.gc_params.empty()) continue;
        GeneralParams g = parse_gc_params(r.gc_params, r.family);
        auto [ident, cong] = derive_general_conjecture(g, r.id);
        out.push_back(ident);
        out.push_back(cong);
    }
    return out;
}

inline void run_record(const ConjectureRecord& rec, const RunConfig& cfg, const Registry& reg,
                       Report& report, std::mutex& mu) {
    std::vector<ReportRow> rows;
    if (rec.kind == RecordKind::Identity) {
        for (auto& v : verify_identity(rec, cfg.digits, reg, 3, cfg.sum))
            rows.push_back(row_from(rec, v));
    } else {
        for (auto& v : verify_congruence(rec, cfg.prime_min, cfg.prime_max, reg, cfg.strategy,
                                         cfg.auto_strategy))
            rows.push_back(row_from(rec, v));
    }
    std::lock_guard<std::mutex> lock(mu);
    for (auto& r : rows) report.rows.push_back(std::move(r));
}

// Verify a selection of records (all when `ids` is empty). Derived template
// records are included when no explicit selection is given.
inline Report run_verification(const Registry& reg, const RunConfig& cfg,
                               const std::vector<std::string>& ids = {}) {
    cfg.validate();
    if (!cfg.cache_dir.empty()) ConstantCache::instance().set_dir(cfg.cache_dir);

    std::vector<ConjectureRecord> selected;
    if (ids.empty()) {
        selected.assign(reg.records.begin(), reg.records.end());
        for (auto& d : derived_records(reg)) selected.push_back(d);
    } else {
        for (auto& q : ids) {
            auto matches = reg.match(q);
            if (matches.empty()) throw std::invalid_argument("unknown record id '" + q + "'");
            for (auto* m : matches) selected.push_back(*m);
        }
    }

    Report report;
    report.config = cfg.to_json();
    std::mutex mu;
    parallel_for(selected.size(), cfg.parallelism,
                 [&](size_t i) { run_record(selected[i], cfg, reg, report, mu); });
    report.sort_rows();
    return report;
}

// Discovery over a summand series against a basis of named constants.
struct DiscoveryReport {
    std::string series;
    std::string value;
    std::vector<std::string> basis;
    std::optional<std::string> candidate;
    double margin = 0;
    double residual_log10 = 0;
};

inline DiscoveryReport run_discovery(const SummandExpr& summand, long start,
                                     const std::vector<std::string>& basis_exprs, int digits,
                                     const Registry& reg, const Int& max_height) {
    DiscoveryReport out;
    out.series = print_summand(summand);
    SeriesEnclosure e = sum_to_tolerance(summand, start, digits + 12, reg.resolver());
    if (e.status != SumStatus::Converged)
        throw std::runtime_error("series did not converge to the requested precision");
    out.value = e.value.str(digits);
    mpfr_prec_t prec = prec_for_digits(digits + 12);
    std::vector<std::pair<std::string, RealBall>> basis;
    for (auto& b : basis_exprs)
        basis.push_back({b, eval_closed_form(parse_expr(b, {}), digits + 12, prec, nullptr)});
    DiscoveryCandidate cand = discover_closed_form(e.value, basis, digits, max_height);
    out.basis = basis_exprs;
    out.candidate = cand.closed_form;
    out.margin = cand.margin_digits;
    out.residual_log10 = cand.residual_log10;
    return out;
}

// The default basis menu for series with no known closed form.
inline std::vector<std::string> default_discovery_basis() {
    return {"zeta(5)", "pi^2*zeta(3)", "pi^4*log(2)", "G*pi^2", "beta(4)",
            "pi*G",    "zeta(3)*log(2)", "pi^3",      "K",      "L"};
}

} // namespace certsum
