// Command-line front end: verify registry records, discover closed forms,
// manage the constants cache.

#include "certsum/runner.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

using namespace certsum;

namespace {

constexpr int kExitUsage = 64;
constexpr int kExitNoInput = 66;

std::string default_registry() {
    return std::string(CERTSUM_DATA_DIR) + "/registry.txt";
}

std::string resolve_cache_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("CERTSUM_CACHE_DIR")) return env;
    return "";
}

Registry load_or_die(const std::string& path) {
    std::ifstream probe(path);
    if (!probe) {
        std::cerr << "certsum: cannot open registry '" << path << "'\n";
        std::exit(kExitNoInput);
    }
    probe.close();
    return Registry::load(path);
}

void apply_config_file(const std::string& path, RunConfig& cfg) {
    std::ifstream in(path);
    if (!in) {
        std::cerr << "certsum: cannot open config '" << path << "'\n";
        std::exit(kExitNoInput);
    }
    Json j = Json::parse(in);
    if (j.contains("registry")) cfg.registry_path = j["registry"].get<std::string>();
    if (j.contains("digits")) cfg.digits = j["digits"].get<int>();
    if (j.contains("prime_min")) cfg.prime_min = j["prime_min"].get<long>();
    if (j.contains("prime_max")) cfg.prime_max = j["prime_max"].get<long>();
    if (j.contains("parallelism")) cfg.parallelism = j["parallelism"].get<int>();
    if (j.contains("cache_dir")) cfg.cache_dir = j["cache_dir"].get<std::string>();
    if (j.contains("format")) cfg.format = j["format"].get<std::string>();
    if (j.contains("strategy")) {
        std::string s = j["strategy"].get<std::string>();
        cfg.auto_strategy = false;
        if (s == "exact") cfg.strategy = CongruenceStrategy::ExactRational;
        else if (s == "fast") cfg.strategy = CongruenceStrategy::ModPKFast;
        else if (s == "auto") cfg.auto_strategy = true;
        else throw std::invalid_argument("strategy must be exact|fast|auto");
    }
}

int emit_report(const Report& report, const RunConfig& cfg, const std::string& out_path) {
    std::string text;
    if (cfg.format == "json") text = report.to_json().dump(2) + "\n";
    else if (cfg.format == "markdown") text = report.markdown();
    else text = report.csv();
    if (out_path.empty()) {
        std::cout << text;
    } else {
        std::ofstream out(out_path);
        out << text;
    }
    auto summary = report.to_json()["summary"];
    std::cerr << "rows " << summary["rows"] << ", failures " << summary["failures"]
              << ", exempt failures " << summary["exempt_failures"] << ", inconclusive "
              << summary["inconclusive"] << ", skipped " << summary["skipped"] << "\n";
    return report.exit_code();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"certified verification of harmonic-number series and congruences"};
    app.require_subcommand(1);
    app.fallthrough();

    RunConfig cfg;
    cfg.registry_path = default_registry();
    std::string config_file, cache_flag;
    app.add_option("--registry", cfg.registry_path, "registry file path");
    app.add_option("--config", config_file, "JSON config file mirroring the run options");
    app.add_option("--cache-dir", cache_flag,
                   "constants cache directory (or CERTSUM_CACHE_DIR)");
    app.add_option("--jobs", cfg.parallelism, "parallel verification jobs");

    auto* list_cmd = app.add_subcommand("list", "list registry records");
    std::string list_class;
    list_cmd->add_option("--class", list_class, "filter by class (conjecture|baseline|derived)");

    auto* verify_cmd = app.add_subcommand("verify", "verify selected records");
    std::vector<std::string> ids;
    std::string out_path, strategy_flag;
    verify_cmd->add_option("--id", ids, "record id or id prefix (repeatable)")->required();
    verify_cmd->add_option("--digits", cfg.digits, "identity digit target");
    verify_cmd->add_option("--prime-min", cfg.prime_min, "smallest prime");
    verify_cmd->add_option("--prime-max", cfg.prime_max, "largest prime");
    verify_cmd->add_option("--strategy", strategy_flag, "exact|fast|auto");
    verify_cmd->add_option("--format", cfg.format, "json|markdown|csv");
    verify_cmd->add_option("--out", out_path, "write the report here instead of stdout");

    auto* all_cmd = app.add_subcommand("verify-all", "verify the whole registry");
    all_cmd->add_option("--digits", cfg.digits, "identity digit target");
    all_cmd->add_option("--prime-min", cfg.prime_min, "smallest prime");
    all_cmd->add_option("--prime-max", cfg.prime_max, "largest prime");
    all_cmd->add_option("--strategy", strategy_flag, "exact|fast|auto");
    all_cmd->add_option("--format", cfg.format, "json|markdown|csv");
    all_cmd->add_option("--out", out_path, "write the report here instead of stdout");
    std::string klass_filter;
    all_cmd->add_option("--class", klass_filter, "restrict to one record class");

    auto* discover_cmd = app.add_subcommand("discover", "propose a closed form via PSLQ");
    std::string disc_id, disc_summand, basis_csv;
    long disc_start = 0;
    int disc_digits = 60;
    double disc_height = 1e8;
    discover_cmd->add_option("--id", disc_id, "registry record supplying the series");
    discover_cmd->add_option("--summand", disc_summand, "raw summand expression");
    discover_cmd->add_option("--start", disc_start, "first index of a raw summand");
    discover_cmd->add_option("--basis", basis_csv,
                             "comma-separated constant expressions (default menu otherwise)");
    discover_cmd->add_option("--digits", disc_digits, "working digits");
    discover_cmd->add_option("--max-height", disc_height, "largest coefficient magnitude");

    auto* report_cmd = app.add_subcommand("report", "re-render a JSON report");
    std::string report_in, report_format = "markdown";
    report_cmd->add_option("--in", report_in, "input JSON report")->required();
    report_cmd->add_option("--format", report_format, "markdown|csv");

    auto* cache_cmd = app.add_subcommand("cache", "constants cache maintenance");
    std::string cache_op = "stats";
    cache_cmd->add_option("op", cache_op, "stats|clear");

    auto* derive_cmd = app.add_subcommand("derive", "instantiate the log-series template");
    int d_family = 1;
    std::string d_params;
    derive_cmd->add_option("--family", d_family, "template family 1..4")->required();
    derive_cmd->add_option("--params", d_params, "a,b,m,c,d")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (!config_file.empty()) apply_config_file(config_file, cfg);
        cfg.cache_dir = resolve_cache_dir(!cache_flag.empty() ? cache_flag : cfg.cache_dir);
        if (!cfg.cache_dir.empty()) ConstantCache::instance().set_dir(cfg.cache_dir);
        if (!strategy_flag.empty()) {
            cfg.auto_strategy = false;
            if (strategy_flag == "exact") cfg.strategy = CongruenceStrategy::ExactRational;
            else if (strategy_flag == "fast") cfg.strategy = CongruenceStrategy::ModPKFast;
            else if (strategy_flag == "auto") cfg.auto_strategy = true;
            else throw std::invalid_argument("strategy must be exact|fast|auto");
        }

        if (*list_cmd) {
            Registry reg = load_or_die(cfg.registry_path);
            for (auto& r : reg.records) {
                std::string klass = r.klass == RecordClass::Conjecture ? "conjecture"
                                    : r.klass == RecordClass::Baseline ? "baseline"
                                                                       : "derived";
                if (!list_class.empty() && klass != list_class) continue;
                std::cout << r.id << "\t" << (r.kind == RecordKind::Identity ? "identity" : "congruence")
                          << "\t" << klass << "\t" << r.provenance << "\n";
            }
            return 0;
        }
        if (*verify_cmd || *all_cmd) {
            Registry reg = load_or_die(cfg.registry_path);
            std::vector<std::string> selection = (*verify_cmd) ? ids : std::vector<std::string>{};
            Report report = run_verification(reg, cfg, selection);
            if (*all_cmd && !klass_filter.empty()) {
                std::erase_if(report.rows,
                              [&](const ReportRow& r) { return r.klass != klass_filter; });
            }
            return emit_report(report, cfg, out_path);
        }
        if (*discover_cmd) {
            Registry reg = load_or_die(cfg.registry_path);
            SummandExpr summand;
            long start = disc_start;
            if (!disc_id.empty()) {
                const ConjectureRecord* rec = reg.find(disc_id);
                if (!rec) throw std::invalid_argument("unknown record id '" + disc_id + "'");
                summand = rec->summand_for({});
                start = rec->start;
            } else if (!disc_summand.empty()) {
                summand = parse_summand(disc_summand);
            } else {
                throw std::invalid_argument("discover needs --id or --summand");
            }
            std::vector<std::string> basis;
            if (basis_csv.empty()) {
                basis = default_discovery_basis();
            } else {
                std::istringstream bs(basis_csv);
                std::string tok;
                while (std::getline(bs, tok, ';')) basis.push_back(tok);
                if (basis.size() == 1 && basis_csv.find(';') == std::string::npos) {
                    basis.clear();
                    int depth = 0;
                    std::string cur;
                    for (char c : basis_csv) {
                        if (c == '(') ++depth;
                        if (c == ')') --depth;
                        if (c == ',' && depth == 0) {
                            basis.push_back(cur);
                            cur.clear();
                        } else {
                            cur.push_back(c);
                        }
                    }
                    if (!cur.empty()) basis.push_back(cur);
                }
            }
            Registry regref = reg;
            DiscoveryReport d = run_discovery(summand, start, basis, disc_digits, regref,
                                              Int(static_cast<long>(disc_height)));
            Json j;
            j["series"] = d.series;
            j["value"] = d.value;
            j["basis"] = d.basis;
            j["candidate"] = d.candidate ? Json(*d.candidate) : Json(nullptr);
            j["margin_digits"] = d.margin;
            j["residual_log10"] = d.residual_log10;
            j["note"] = "candidate only; nothing here is proved";
            std::cout << j.dump(2) << "\n";
            return 0;
        }
        if (*report_cmd) {
            std::ifstream in(report_in);
            if (!in) {
                std::cerr << "certsum: cannot open report '" << report_in << "'\n";
                return kExitNoInput;
            }
            Json j = Json::parse(in);
            if (report_format == "markdown") {
                std::cout << "| id | kind | verdict | where |\n|----|------|---------|-------|\n";
                for (auto& row : j["results"]) {
                    std::string where = row.contains("prime")
                                            ? "p = " + row["prime"].dump()
                                            : row.value("digits", 0) > 0
                                                  ? std::to_string(row.value("digits", 0)) + " digits"
                                                  : "";
                    std::cout << "| " << row["id"].get<std::string>() << " | "
                              << row["kind"].get<std::string>() << " | "
                              << row["verdict"].get<std::string>() << " | " << where << " |\n";
                }
            } else {
                std::cout << j.dump(2) << "\n";
            }
            return 0;
        }
        if (*cache_cmd) {
            if (cfg.cache_dir.empty()) {
                std::cout << "cache: disabled (no directory configured)\n";
                return 0;
            }
            if (cache_op == "clear") {
                ConstantCache::instance().clear_disk();
                std::cout << "cache: cleared\n";
            } else {
                std::cout << "cache: " << cfg.cache_dir << ", "
                          << ConstantCache::instance().disk_entries() << " entries\n";
            }
            return 0;
        }
        if (*derive_cmd) {
            GeneralParams g = parse_gc_params(d_params, d_family);
            auto [ident, cong] = derive_general_conjecture(g, "CLI");
            for (auto* r : {&ident, &cong}) {
                std::cout << "[record " << r->id << "]\n"
                          << "kind = " << (r->kind == RecordKind::Identity ? "identity" : "congruence")
                          << "\nclass = derived\nstart = " << r->start
                          << "\nlimit = " << limit_name(r->limit) << "\n";
                if (r->kind == RecordKind::Congruence)
                    std::cout << "modexp = " << r->modexp << "\nfilter = " << r->filter.str()
                              << "\n";
                std::cout << "summand = " << r->summand_text << "\nrhs = " << r->rhs_text
                          << "\n\n";
            }
            return 0;
        }
    } catch (const RegistryError& e) {
        std::cerr << "certsum: " << e.what() << "\n";
        return kExitNoInput;
    } catch (const std::invalid_argument& e) {
        std::cerr << "certsum: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "certsum: " << e.what() << "\n";
        return 1;
    }
    return kExitUsage;
}
