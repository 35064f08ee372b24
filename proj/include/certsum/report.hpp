#pragma once

#include "certsum/congruence.hpp"
#include "certsum/series.hpp"

#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace certsum {

using Json = nlohmann::ordered_json;

// One row of a verification report; identity and congruence verdicts share
// the schema with unused fields left null.
struct ReportRow {
    std::string id;
    std::string kind;    // identity | congruence
    std::string klass;   // conjecture | baseline | derived
    std::string verdict; // CertifiedEqual/... or holds/fails/skipped
    bool ok = false;
    bool exempt = false;
    int digits = 0;
    long prime = 0;
    std::string sample;
    std::string lhs, rhs;
    double bound_log10 = 0;
    std::string strategy;
    long terms = 0;
    double elapsed_ms = 0;
    std::string detail;
};

inline ReportRow row_from(const ConjectureRecord& rec, const IdentityVerdict& v) {
    ReportRow r;
    r.id = v.id;
    r.kind = "identity";
    r.klass = rec.klass == RecordClass::Conjecture ? "conjecture"
              : rec.klass == RecordClass::Baseline ? "baseline"
                                                   : "derived";
    r.verdict = v.status == SumStatus::TailCapHit ? "TailCapHit" : verdict_name(v.verdict);
    r.ok = v.verdict == Verdict::CertifiedEqual;
    r.exempt = rec.exempt;
    r.digits = v.digits;
    r.sample = v.sample;
    r.lhs = v.lhs;
    r.rhs = v.rhs;
    r.bound_log10 = v.bound_log10;
    r.terms = v.terms;
    r.elapsed_ms = v.elapsed_ms;
    return r;
}

inline ReportRow row_from(const ConjectureRecord& rec, const CongruenceVerdict& v) {
    ReportRow r;
    r.id = v.id;
    r.kind = "congruence";
    r.klass = rec.klass == RecordClass::Conjecture ? "conjecture"
              : rec.klass == RecordClass::Baseline ? "baseline"
                                                   : "derived";
    r.verdict = v.skipped ? "skipped" : (v.holds ? "holds" : "fails");
    r.ok = v.holds || v.skipped;
    r.exempt = rec.exempt;
    r.prime = v.prime;
    r.sample = v.sample;
    r.lhs = v.lhs;
    r.rhs = v.rhs;
    r.strategy = strategy_name(v.strategy);
    r.elapsed_ms = v.elapsed_ms;
    r.detail = v.skip_reason;
    return r;
}

inline Json to_json(const ReportRow& r) {
    Json j;
    j["id"] = r.id;
    j["kind"] = r.kind;
    j["class"] = r.klass;
    j["verdict"] = r.verdict;
    j["ok"] = r.ok;
    if (r.exempt) j["exempt"] = true;
    if (r.kind == "identity") j["digits"] = r.digits;
    else j["prime"] = r.prime;
    if (!r.sample.empty()) j["sample"] = r.sample;
    j["lhs"] = r.lhs;
    j["rhs"] = r.rhs;
    if (r.kind == "identity") j["bound_log10"] = r.bound_log10;
    if (!r.strategy.empty()) j["strategy"] = r.strategy;
    if (r.terms) j["terms"] = r.terms;
    j["elapsed_ms"] = r.elapsed_ms;
    if (!r.detail.empty()) j["detail"] = r.detail;
    return j;
}

struct Report {
    Json config;
    std::vector<ReportRow> rows;

    void sort_rows() {
        std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
            if (a.id != b.id) return a.id < b.id;
            if (a.sample != b.sample) return a.sample < b.sample;
            return a.prime < b.prime;
        });
    }

    Json to_json(bool strip_elapsed = false) const {
        Json j;
        j["schema"] = 1;
        j["config"] = config;
        j["results"] = Json::array();
        long fails = 0, inconclusive = 0, skipped = 0, exempt_fails = 0;
        for (auto& r : rows) {
            Json row = certsum::to_json(r);
            if (strip_elapsed) row.erase("elapsed_ms");
            j["results"].push_back(row);
            if (r.verdict == "skipped") ++skipped;
            else if (r.verdict == "Inconclusive" || r.verdict == "TailCapHit") ++inconclusive;
            else if (!r.ok) (r.exempt ? ++exempt_fails : ++fails);
        }
        j["summary"] = {{"rows", rows.size()},
                        {"failures", fails},
                        {"exempt_failures", exempt_fails},
                        {"inconclusive", inconclusive},
                        {"skipped", skipped}};
        return j;
    }

    // exit code: 0 clean, 1 hard failure, 2 inconclusive only
    int exit_code() const {
        bool any_inconclusive = false;
        for (auto& r : rows) {
            if (r.verdict == "skipped") continue;
            if (r.verdict == "Inconclusive" || r.verdict == "TailCapHit") {
                if (!r.exempt) any_inconclusive = true;
                continue;
            }
            if (!r.ok && !r.exempt) return 1;
        }
        return any_inconclusive ? 2 : 0;
    }

    std::string markdown() const {
        std::ostringstream os;
        os << "| id | kind | verdict | where | bound | elapsed |\n";
        os << "|----|------|---------|-------|-------|---------|\n";
        for (auto& r : rows) {
            std::string where = r.kind == "identity"
                                    ? (std::to_string(r.digits) + " digits" +
                                       (r.sample.empty() ? "" : " @ " + r.sample))
                                    : ("p = " + std::to_string(r.prime) +
                                       (r.sample.empty() ? "" : " @ " + r.sample));
            os << "| " << r.id << " | " << r.kind << " | " << r.verdict << " | " << where
               << " | ";
            if (r.kind == "identity")
                os << "1e" << std::fixed << std::setprecision(0) << r.bound_log10;
            os << " | " << std::fixed << std::setprecision(1) << r.elapsed_ms << " ms |\n";
        }
        return os.str();
    }

    std::string csv() const {
        std::ostringstream os;
        os << "id,kind,class,verdict,ok,digits,prime,sample,bound_log10,strategy,terms,elapsed_ms\n";
        for (auto& r : rows) {
            os << r.id << ',' << r.kind << ',' << r.klass << ',' << r.verdict << ','
               << (r.ok ? 1 : 0) << ',' << r.digits << ',' << r.prime << ",\"" << r.sample
               << "\"," << r.bound_log10 << ',' << r.strategy << ',' << r.terms << ','
               << r.elapsed_ms << "\n";
        }
        return os.str();
    }
};

} // namespace certsum
