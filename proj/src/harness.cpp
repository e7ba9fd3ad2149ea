#include "srgan/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace srgan {

namespace fs = std::filesystem;

void SweepConfig::validate() const {
    if (methods.empty()) throw std::invalid_argument("sweep: no methods requested");
    if (labeled_sizes.empty()) throw std::invalid_argument("sweep: no labeled sizes");
    if (!std::is_sorted(labeled_sizes.begin(), labeled_sizes.end())) {
        throw std::invalid_argument("sweep: labeled sizes must be ascending");
    }
    if (labeled_sizes.front() == 0) throw std::invalid_argument("sweep: labeled sizes must be positive");
    if (n_seeds == 0) throw std::invalid_argument("sweep: n_seeds must be >= 1");
    if (variants.empty()) throw std::invalid_argument("sweep: no loss variants");
    if (n_test == 0) throw std::invalid_argument("sweep: n_test must be positive");
    base.validate();
}

SweepConfig preset(std::string_view name) {
    SweepConfig c;
    if (name == "desk") {
        c.labeled_sizes = {50, 100, 500, 1000};
        c.n_unlabeled = 5'000;
        c.n_seeds = 3;
        return c;
    }
    if (name == "paper") {
        c.labeled_sizes = {50, 100, 500, 1000, 5000, 10000};
        c.n_unlabeled = 50'000;
        c.n_seeds = 3;
        return c;
    }
    throw std::invalid_argument("unknown preset '" + std::string(name) + "' (expected desk or paper)");
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(trim(cur));
    return out;
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double to_double(const std::string& s) {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("not a number: '" + s + "'");
    return v;
}

std::size_t to_size(const std::string& s) {
    if (s.empty() || s.front() == '-') throw std::invalid_argument("not a count: '" + s + "'");
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument("not a count: '" + s + "'");
    return static_cast<std::size_t>(v);
}

bool to_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw std::invalid_argument("not a boolean: '" + s + "'");
}

// Applies one setting; list values arrive already split.
void apply_setting(SweepConfig& c, const std::string& key, const std::vector<std::string>& vals) {
    const auto one = [&]() -> const std::string& {
        if (vals.size() != 1) throw std::invalid_argument("key '" + key + "' takes a single value");
        return vals.front();
    };
    TrainConfig& t = c.base;
    if (key == "methods") {
        c.methods.clear();
        for (const auto& v : vals) c.methods.push_back(parse_method(v));
    } else if (key == "variants") {
        c.variants.clear();
        for (const auto& v : vals) c.variants.push_back(parse_loss_variant(v));
    } else if (key == "labeled_sizes") {
        c.labeled_sizes.clear();
        for (const auto& v : vals) c.labeled_sizes.push_back(to_size(v));
    } else if (key == "n_unlabeled") {
        c.n_unlabeled = to_size(one());
    } else if (key == "n_test") {
        c.n_test = to_size(one());
    } else if (key == "n_seeds") {
        c.n_seeds = to_size(one());
    } else if (key == "noise_sigma") {
        c.noise_sigma = to_double(one());
    } else if (key == "workers") {
        c.workers = to_size(one());
    } else if (key == "write_histories") {
        c.write_histories = to_bool(one());
    } else if (key == "steps") {
        t.steps = static_cast<long>(to_size(one()));
    } else if (key == "batch_labeled") {
        t.batch_labeled = to_size(one());
    } else if (key == "batch_unlabeled") {
        t.batch_unlabeled = to_size(one());
    } else if (key == "batch_fake") {
        t.batch_fake = to_size(one());
    } else if (key == "learning_rate_d") {
        t.learning_rate_d = to_double(one());
    } else if (key == "learning_rate_g") {
        t.learning_rate_g = to_double(one());
    } else if (key == "lambda") {
        t.lambda = to_double(one());
    } else if (key == "noise_dim") {
        t.noise_dim = to_size(one());
    } else if (key == "eval_interval") {
        t.eval_interval = static_cast<long>(to_size(one()));
    } else {
        throw std::invalid_argument("unknown config key '" + key + "'");
    }
}

std::vector<std::string> json_values(const nlohmann::json& v) {
    std::vector<std::string> out;
    const auto scalar = [](const nlohmann::json& x) -> std::string {
        if (x.is_string()) return x.get<std::string>();
        if (x.is_boolean()) return x.get<bool>() ? "true" : "false";
        if (x.is_number_integer() || x.is_number_unsigned()) return x.dump();
        if (x.is_number_float()) return fmt17(x.get<double>());
        throw std::invalid_argument("unsupported JSON value " + x.dump());
    };
    if (v.is_array()) {
        for (const auto& x : v) out.push_back(scalar(x));
    } else {
        out.push_back(scalar(v));
    }
    return out;
}

std::string csv_safe(std::string s) {
    std::replace_if(s.begin(), s.end(), [](char ch) { return ch == ',' || ch == '\n' || ch == '\r'; }, ';');
    return s;
}

std::string method_label(Method m, std::optional<LossVariant> v) {
    std::string label(to_string(m));
    if (m == Method::SRGAN && v && *v != LossVariant::LogContrast) label += "-" + std::string(to_string(*v));
    return label;
}

std::string history_name(Method m, std::optional<LossVariant> v, std::size_t size, std::uint64_t seed) {
    std::string name(to_string(m));
    if (v) name += "-" + std::string(to_string(*v));
    return name + "_n" + std::to_string(size) + "_s" + std::to_string(seed) + ".csv";
}

}  // namespace

SweepConfig parse_sweep_config(std::string_view text, SweepConfig base) {
    const std::string body = trim(text);
    if (!body.empty() && body.front() == '{') {
        const auto j = nlohmann::json::parse(body);
        for (const auto& [key, value] : j.items()) apply_setting(base, key, json_values(value));
        return base;
    }
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value");
        }
        apply_setting(base, trim(line.substr(0, eq)), split(line.substr(eq + 1), ','));
    }
    return base;
}

SweepConfig load_sweep_config(const fs::path& path, SweepConfig base) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_sweep_config(ss.str(), std::move(base));
}

ResultKey key_of(const ExperimentResult& r) {
    return {r.method, r.variant, r.labeled_size, r.seed};
}

std::string format_result_row(const ExperimentResult& r) {
    std::ostringstream out;
    out << to_string(r.method) << ',' << (r.variant ? std::string(to_string(*r.variant)) : "") << ','
        << r.labeled_size << ',' << r.seed << ',' << (r.ok ? "ok" : "failed") << ','
        << fmt17(r.test_mae) << ',' << fmt17(r.wall_time) << ',' << r.bundle_checksum << ','
        << csv_safe(r.history_path) << ',' << csv_safe(r.error);
    return out.str();
}

std::vector<ExperimentResult> read_results(const fs::path& path) {
    std::vector<ExperimentResult> rows;
    std::ifstream in(path);
    if (!in) return rows;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 10) continue;  // torn final line after a crash
        ExperimentResult r;
        try {
            r.method = parse_method(f[0]);
            if (!f[1].empty()) r.variant = parse_loss_variant(f[1]);
            r.labeled_size = to_size(f[2]);
            r.seed = to_size(f[3]);
            r.ok = f[4] == "ok";
            r.test_mae = to_double(f[5]);
            r.wall_time = to_double(f[6]);
            r.bundle_checksum = std::stoull(f[7]);
        } catch (const std::exception&) {
            continue;
        }
        r.history_path = f[8];
        r.error = f[9];
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<ExperimentResult> run_sweep(const SweepConfig& cfg, SweepProgress* progress) {
    cfg.validate();
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + cfg.output_dir.string());
    const fs::path results_path = cfg.output_dir / "results.csv";
    const fs::path history_dir = cfg.output_dir / "histories";
    if (cfg.write_histories) fs::create_directories(history_dir, ec);

    std::map<ResultKey, ExperimentResult> collected;
    for (auto& r : read_results(results_path)) collected[key_of(r)] = r;

    const bool fresh = !fs::exists(results_path) || fs::file_size(results_path) == 0;
    std::ofstream out(results_path, std::ios::app);
    if (!out) throw std::runtime_error("cannot write " + results_path.string());
    if (fresh) out << kResultsHeader << '\n' << std::flush;

    struct Task {
        Method method;
        std::optional<LossVariant> variant;
    };
    struct Group {
        std::size_t size;
        std::uint64_t seed;
        std::vector<Task> tasks;
    };
    std::vector<Group> groups;
    SweepProgress local;
    for (std::size_t size : cfg.labeled_sizes) {
        for (std::uint64_t seed = 0; seed < cfg.n_seeds; ++seed) {
            Group g{size, seed, {}};
            for (Method m : cfg.methods) {
                std::vector<std::optional<LossVariant>> vs;
                if (m == Method::SRGAN) vs.assign(cfg.variants.begin(), cfg.variants.end());
                else vs.push_back(std::nullopt);
                for (const auto& v : vs) {
                    const auto it = collected.find({m, v, size, seed});
                    if (it != collected.end() && it->second.ok) {
                        ++local.trials_skipped;
                        continue;
                    }
                    g.tasks.push_back({m, v});
                }
            }
            if (!g.tasks.empty()) groups.push_back(std::move(g));
        }
    }

    std::mutex mu;
    std::atomic<std::size_t> next{0};
    const auto work = [&] {
        for (std::size_t gi = next++; gi < groups.size(); gi = next++) {
            const Group& g = groups[gi];
            const DatasetBundle bundle =
                build_bundle(g.seed, g.size, cfg.n_unlabeled, cfg.n_test, cfg.noise_sigma);
            const std::uint64_t checksum = bundle_checksum(bundle);
            for (const Task& task : g.tasks) {
                ExperimentResult r;
                r.method = task.method;
                r.variant = task.variant;
                r.labeled_size = g.size;
                r.seed = g.seed;
                r.bundle_checksum = checksum;
                TrainConfig tc = cfg.base;
                tc.method = task.method;
                if (task.variant) tc.variant = *task.variant;
                tc.seed = g.seed;
                const auto t0 = std::chrono::steady_clock::now();
                try {
                    const TrainResult res = train(tc, bundle);
                    r.test_mae = res.test_mae;
                    r.ok = true;
                    if (cfg.write_histories) {
                        const fs::path hp = history_dir / history_name(task.method, task.variant, g.size, g.seed);
                        write_history_csv(res.history, hp);
                        r.history_path = fs::relative(hp, cfg.output_dir).string();
                    }
                } catch (const std::exception& e) {
                    r.ok = false;
                    r.error = e.what();
                }
                r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

                std::lock_guard lock(mu);
                out << format_result_row(r) << '\n' << std::flush;
                ++local.trials_run;
                if (!r.ok) ++local.trials_failed;
                collected[key_of(r)] = std::move(r);
            }
        }
    };

    std::size_t workers = cfg.workers ? cfg.workers : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, std::max<std::size_t>(groups.size(), 1));
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(work);
    }

    if (progress) *progress = local;
    std::vector<ExperimentResult> rows;
    for (auto& [key, r] : collected) {
        // Only report rows that belong to this sweep's grid.
        const auto& [m, v, size, seed] = key;
        const bool in_grid =
            std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end() &&
            std::find(cfg.labeled_sizes.begin(), cfg.labeled_sizes.end(), size) != cfg.labeled_sizes.end() &&
            seed < cfg.n_seeds &&
            (!v || std::find(cfg.variants.begin(), cfg.variants.end(), *v) != cfg.variants.end());
        if (in_grid) rows.push_back(r);
    }
    return rows;
}

AggregateTables aggregate(const std::vector<ExperimentResult>& results, bool with_ratios) {
    std::map<std::pair<std::size_t, std::string>, std::map<std::uint64_t, double>> cells;
    for (const auto& r : results) {
        if (!r.ok) continue;
        cells[{r.labeled_size, method_label(r.method, r.variant)}][r.seed] = r.test_mae;
    }
    AggregateTables t;
    for (const auto& [key, by_seed] : cells) {
        Cell c;
        c.labeled_size = key.first;
        c.method = key.second;
        double total = 0.0;
        for (const auto& [seed, v] : by_seed) {
            c.seed_maes.push_back(v);
            total += v;
        }
        c.mean_mae = total / static_cast<double>(c.seed_maes.size());
        t.accuracy.push_back(std::move(c));
    }
    if (!with_ratios) return t;
    for (const Cell& c : t.accuracy) {
        if (c.method == "dnn") continue;
        const auto base = std::find_if(t.accuracy.begin(), t.accuracy.end(), [&](const Cell& b) {
            return b.method == "dnn" && b.labeled_size == c.labeled_size;
        });
        if (base == t.accuracy.end()) {
            throw std::runtime_error("aggregate: no dnn baseline at labeled size " +
                                     std::to_string(c.labeled_size) + " for " + c.method);
        }
        t.relative.push_back({c.method, c.labeled_size, c.mean_mae / base->mean_mae});
    }
    return t;
}

std::vector<VariantRow> loss_variant_study(SweepConfig cfg, const std::vector<LossVariant>& variants,
                                           std::size_t labeled_size) {
    cfg.methods = {Method::SRGAN};
    cfg.variants = variants;
    cfg.labeled_sizes = {labeled_size};
    const auto results = run_sweep(cfg);
    std::vector<VariantRow> rows;
    for (LossVariant v : variants) {
        VariantRow row;
        row.variant = v;
        for (const auto& r : results) {
            if (r.ok && r.variant == v) row.seed_maes.push_back(r.test_mae);
        }
        double total = 0.0;
        for (double m : row.seed_maes) total += m;
        row.mean_mae = row.seed_maes.empty() ? 0.0 : total / static_cast<double>(row.seed_maes.size());
        rows.push_back(std::move(row));
    }
    return rows;
}

void emit_plot_data(const AggregateTables& tables, const fs::path& dir) {
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "accuracy.csv", std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + (dir / "accuracy.csv").string());
        out << "labeled_size,method,mean_mae,n_seeds,seed_maes\n";
        for (const auto& c : tables.accuracy) {
            out << c.labeled_size << ',' << c.method << ',' << fmt17(c.mean_mae) << ',' << c.seed_maes.size()
                << ',';
            for (std::size_t i = 0; i < c.seed_maes.size(); ++i) out << (i ? ";" : "") << fmt17(c.seed_maes[i]);
            out << '\n';
        }
    }
    std::ofstream out(dir / "relative_error.csv", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / "relative_error.csv").string());
    out << "labeled_size,method,ratio\n";
    for (const auto& r : tables.relative) out << r.labeled_size << ',' << r.method << ',' << fmt17(r.ratio) << '\n';
}

AggregateTables read_plot_data(const fs::path& dir) {
    AggregateTables t;
    std::string line;
    std::ifstream acc(dir / "accuracy.csv");
    if (!acc) throw std::runtime_error("cannot read " + (dir / "accuracy.csv").string());
    std::getline(acc, line);
    while (std::getline(acc, line)) {
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 5) throw std::runtime_error("accuracy.csv: malformed row '" + line + "'");
        Cell c;
        c.labeled_size = to_size(f[0]);
        c.method = f[1];
        c.mean_mae = to_double(f[2]);
        if (!f[4].empty()) {
            for (const auto& v : split(f[4], ';')) c.seed_maes.push_back(to_double(v));
        }
        if (c.seed_maes.size() != to_size(f[3])) throw std::runtime_error("accuracy.csv: seed count mismatch");
        t.accuracy.push_back(std::move(c));
    }
    std::ifstream rel(dir / "relative_error.csv");
    if (!rel) throw std::runtime_error("cannot read " + (dir / "relative_error.csv").string());
    std::getline(rel, line);
    while (std::getline(rel, line)) {
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 3) throw std::runtime_error("relative_error.csv: malformed row '" + line + "'");
        t.relative.push_back({f[1], to_size(f[0]), to_double(f[2])});
    }
    return t;
}

void write_variant_table(const std::vector<VariantRow>& rows, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "variant,mean_mae,n_seeds,seed_maes\n";
    for (const auto& r : rows) {
        out << to_string(r.variant) << ',' << fmt17(r.mean_mae) << ',' << r.seed_maes.size() << ',';
        for (std::size_t i = 0; i < r.seed_maes.size(); ++i) out << (i ? ";" : "") << fmt17(r.seed_maes[i]);
        out << '\n';
    }
}

std::string format_report(const AggregateTables& tables) {
    std::ostringstream out;
    char buf[160];
    out << "Test MAE (mean over seeds)\n";
    std::snprintf(buf, sizeof buf, "%-14s %-14s %-10s %s\n", "labeled_size", "method", "mean_mae", "seeds");
    out << buf;
    for (const auto& c : tables.accuracy) {
        std::snprintf(buf, sizeof buf, "%-14zu %-14s %-10.4f %zu\n", c.labeled_size, c.method.c_str(),
                      c.mean_mae, c.seed_maes.size());
        out << buf;
    }
    if (!tables.relative.empty()) {
        out << "\nRelative error vs dnn\n";
        std::snprintf(buf, sizeof buf, "%-14s %-14s %s\n", "labeled_size", "method", "ratio");
        out << buf;
        for (const auto& r : tables.relative) {
            std::snprintf(buf, sizeof buf, "%-14zu %-14s %.4f\n", r.labeled_size, r.method.c_str(), r.ratio);
            out << buf;
        }
    }
    return out.str();
}

}  // namespace srgan
