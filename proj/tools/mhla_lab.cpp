// mhla-lab: experiment harness around the mhla library. Subcommands generate
// datasets, fit models, certify identifiability, run sweeps, and roll out
// autoregressive traces. All outputs are deterministic for a fixed config;
// progress goes to stderr, machine-readable results to files (and stdout when
// --stdout is set).

#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mhla/mhla.hpp"

namespace {

using namespace mhla;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// JSON config file: flat object, long option names as keys, unknown keys
// rejected. Command-line flags override config values.
class Config {
  public:
    Config() = default;

    void load(const std::string& path, const std::set<std::string>& known) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_file(path));
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config " + path + ": " + e.what());
        }
        if (!j.is_object()) throw ConfigError("config " + path + ": expected an object");
        for (const auto& [key, value] : j.items()) {
            if (!known.count(key))
                throw ConfigError("config " + path + ": unknown field '" + key + "'");
            values_[key] = value;
        }
    }

    template <typename T>
    void fill(const CLI::Option* opt, const std::string& key, T& target) const {
        if (opt->count() > 0) return;  // flag wins
        auto it = values_.find(key);
        if (it == values_.end()) return;
        try {
            target = it->second.get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config field '" + key + "': " + e.what());
        }
    }

  private:
    std::map<std::string, nlohmann::json> values_;
};

std::uint64_t env_default_seed() {
    if (const char* env = std::getenv("MHLA_LAB_SEED")) {
        try {
            return std::stoull(env);
        } catch (...) {
            throw ConfigError("MHLA_LAB_SEED is not an integer");
        }
    }
    return 0;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stod(item));
    return out;
}

std::vector<std::uint64_t> parse_int_list(const std::string& text) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stoull(item));
    return out;
}

void emit(const std::string& path, const std::string& content, bool to_stdout) {
    if (!path.empty()) write_file(path, content);
    if (to_stdout) std::cout << content << (content.empty() || content.back() == '\n' ? "" : "\n");
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

struct GenArgs {
    std::string task;
    std::uint64_t seed = 0;
    std::size_t d = 2, n_max = 8, n = 100, heads = 1;
    std::size_t states = 2, alphabet = 2, word_len = 2;
    double unitary_fraction = 0.0;
    bool zero_noise = false;
    std::string out = "dataset.jsonl";
    std::string meta_out, vocab_out;
    bool to_stdout = false;
};

int cmd_gen(const GenArgs& args) {
    if (args.meta_out.empty() && args.out.empty())
        throw ConfigError("gen: --out is required");
    const std::string meta_path = args.meta_out.empty() ? args.out + ".meta.json" : args.meta_out;

    std::string dataset_text, meta, vocab_text;
    if (args.task == "random-mhla") {
        auto [data, truth] = gen_random_mhla(args.d, args.n_max, args.n, args.heads, args.seed);
        dataset_text = dataset_to_jsonl(data);
        meta = "{\"task\":\"random-mhla\",\"seed\":" + std::to_string(args.seed) +
               ",\"d\":" + std::to_string(args.d) + ",\"n_max\":" + std::to_string(args.n_max) +
               ",\"n\":" + std::to_string(args.n) + ",\"heads\":" + std::to_string(args.heads) +
               ",\"ground_truth\":" + params_to_json(truth) + "}";
    } else if (args.task == "assoc") {
        const Dataset data =
            gen_assoc(args.d, args.n, args.unitary_fraction, args.seed, args.zero_noise);
        dataset_text = dataset_to_jsonl(data);
        meta = "{\"task\":\"assoc\",\"seed\":" + std::to_string(args.seed) +
               ",\"d\":" + std::to_string(args.d) + ",\"n\":" + std::to_string(args.n) +
               ",\"unitary_fraction\":" + format_double17(args.unitary_fraction) +
               ",\"zero_noise\":" + (args.zero_noise ? std::string("true") : std::string("false")) +
               ",\"ground_truth\":" + params_to_json(assoc_ground_truth(args.d)) + "}";
    } else if (args.task == "dfa") {
        const DfaDataset dd =
            gen_dfa_dataset(args.states, args.alphabet, args.word_len, args.n, args.seed);
        dataset_text = dataset_to_jsonl(dd.data);
        vocab_text = vocabulary_to_json(dd.vocab);
        meta = "{\"task\":\"dfa\",\"seed\":" + std::to_string(args.seed) +
               ",\"states\":" + std::to_string(args.states) +
               ",\"alphabet\":" + std::to_string(args.alphabet) +
               ",\"word_len\":" + std::to_string(args.word_len) +
               ",\"n\":" + std::to_string(args.n) +
               ",\"positions\":" + std::to_string(dd.positions) +
               ",\"embed_dim\":" + std::to_string(dd.embed_dim) + "}";
    } else {
        throw ConfigError("gen: unknown task '" + args.task + "'");
    }

    emit(args.out, dataset_text, args.to_stdout);
    write_file(meta_path, meta + "\n");
    if (!vocab_text.empty()) {
        const std::string vocab_path =
            args.vocab_out.empty() ? args.out + ".vocab.json" : args.vocab_out;
        write_file(vocab_path, vocab_text + "\n");
    }
    std::cerr << "gen: wrote " << args.out << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// learn
// ---------------------------------------------------------------------------

struct LearnArgs {
    std::string data;
    std::string method = "regression";
    double ridge = -1.0;  // < 0: conditioning default
    bool exact_ols = false;
    double rank_tol = 1e-10;
    std::size_t heads = 1, epochs = 1000;
    double lr = 0.001;
    std::uint64_t seed = 0;
    int threads = 1;
    std::string out = "fit_report.json";
    std::string params_out, residuals_out;
    bool to_stdout = false;
};

int cmd_learn(const LearnArgs& args) {
    if (args.data.empty()) throw ConfigError("learn: --data is required");
    const Dataset data = dataset_from_jsonl(read_file(args.data));

    FitReport report;
    if (args.method == "regression") {
        FitOptions opts;
        if (args.exact_ols)
            opts.ridge = 0.0;
        else if (args.ridge >= 0.0)
            opts.ridge = args.ridge;
        opts.rank_tol = args.rank_tol;
        opts.threads = args.threads;
        report = fit_regression(data, opts);
    } else if (args.method == "gd") {
        report = fit_gd(data, args.heads, args.lr, args.epochs, args.seed);
    } else {
        throw ConfigError("learn: unknown method '" + args.method + "'");
    }

    emit(args.out, fit_report_to_json(report) + "\n", args.to_stdout);
    if (!args.params_out.empty()) write_file(args.params_out, params_to_json(report.learned) + "\n");
    if (!args.residuals_out.empty()) {
        CsvWriter csv({"sample_index", "residual"});
        for (std::size_t i = 0; i < report.residual_per_sample.size(); ++i)
            csv.row({std::to_string(i), format_double17(report.residual_per_sample[i])});
        write_file(args.residuals_out, csv.text());
    }
    std::cerr << "learn: train_mse=" << format_double17(report.train_mse)
              << " heads=" << report.learned.heads.size()
              << " wall_time_s=" << format_double17(report.wall_time) << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// certify
// ---------------------------------------------------------------------------

struct CertifyArgs {
    std::string data;
    double centered_m2 = -1.0;  // < 0: raw feature map
    std::string out = "certificate.json";
    std::string spectrum_out;
    bool to_stdout = false;
};

int cmd_certify(const CertifyArgs& args) {
    if (args.data.empty()) throw ConfigError("certify: --data is required");
    const Dataset data = dataset_from_jsonl(read_file(args.data));
    std::optional<double> centered;
    if (args.centered_m2 >= 0.0) centered = args.centered_m2;

    const CertificateReport report = certify(data, centered);
    emit(args.out, certificate_to_json(report) + "\n", args.to_stdout);
    if (!args.spectrum_out.empty()) {
        const SymEigResult eig = sym_eig(second_moment(data, centered));
        CsvWriter csv({"index", "eigenvalue"});
        for (std::size_t i = 0; i < eig.values.size(); ++i)
            csv.row({std::to_string(i), format_double17(eig.values[i])});
        write_file(args.spectrum_out, csv.text());
    }
    std::cerr << "certify: lambda_min=" << format_double17(report.lambda_min)
              << " identifiable=" << (report.identifiable ? "true" : "false") << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepArgs {
    std::string kind = "mixture";
    // mixture sweep
    std::size_t d = 4, n = 1024;
    std::string fractions = "0,0.95,0.99,1.0";
    std::string seeds = "1,2,3";
    // dfa sweep
    std::string param = "states";
    std::string values = "1,2";
    std::size_t states = 2, alphabet = 2, word_len = 1;
    std::string budgets = "16,64,256";
    double accuracy_target = 0.99;
    std::size_t test_n = 50;
    std::uint64_t seed = 0;
    std::string out = "sweep.csv";
    bool to_stdout = false;
};

int cmd_sweep(const SweepArgs& args) {
    if (args.kind == "mixture") {
        const std::vector<double> fractions = parse_double_list(args.fractions);
        const std::vector<std::uint64_t> seeds = parse_int_list(args.seeds);
        if (fractions.empty() || seeds.empty())
            throw ConfigError("sweep: empty fraction or seed grid");
        const MhlaParams truth = assoc_ground_truth(args.d);
        CsvWriter csv({"fraction", "seed", "lambda_min", "param_distance"});
        for (const std::uint64_t seed : seeds) {
            std::cerr << "sweep: mixture seed " << seed << "\n";
            const Dataset good = gen_assoc(args.d, args.n, 0.0, seed);
            const Dataset degen = gen_assoc(args.d, args.n, 1.0, seed + 1000003);
            const auto cells = mixture_sweep(good, degen, truth, fractions, seed);
            for (const MixtureCell& cell : cells)
                csv.row({format_double17(cell.fraction), std::to_string(seed),
                         format_double17(cell.lambda_min),
                         format_double17(cell.recovery_distance)});
        }
        emit(args.out, csv.text(), args.to_stdout);
    } else if (args.kind == "dfa") {
        const std::vector<std::uint64_t> values = parse_int_list(args.values);
        const std::vector<std::uint64_t> budgets = parse_int_list(args.budgets);
        if (values.empty() || budgets.empty())
            throw ConfigError("sweep: empty value or budget grid");
        CsvWriter csv({"param", "value", "tokens", "accuracy"});
        for (const std::uint64_t value : values) {
            std::size_t states = args.states, alphabet = args.alphabet, word_len = args.word_len;
            if (args.param == "states")
                states = value;
            else if (args.param == "alphabet")
                alphabet = value;
            else if (args.param == "word-len")
                word_len = value;
            else
                throw ConfigError("sweep: unknown dfa parameter '" + args.param + "'");
            std::cerr << "sweep: dfa " << args.param << "=" << value << "\n";
            const DfaDataset test =
                gen_dfa_dataset(states, alphabet, word_len, args.test_n, args.seed + 1);
            const std::size_t tokens_per_seq = test.positions;
            double best_acc = 0.0;
            std::size_t used_budget = budgets.back();
            for (const std::uint64_t budget : budgets) {
                const DfaDataset train =
                    gen_dfa_dataset(states, alphabet, word_len, budget, args.seed);
                const FitReport fit = fit_regression(train.data);
                best_acc = next_token_accuracy(fit.learned, test.data);
                used_budget = budget;
                std::cerr << "  budget " << budget << ": accuracy "
                          << format_double17(best_acc) << "\n";
                if (best_acc >= args.accuracy_target) break;
            }
            csv.row({args.param, std::to_string(value),
                     std::to_string(used_budget * tokens_per_seq), format_double17(best_acc)});
        }
        emit(args.out, csv.text(), args.to_stdout);
    } else {
        throw ConfigError("sweep: unknown kind '" + args.kind + "'");
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// rollout
// ---------------------------------------------------------------------------

struct RolloutArgs {
    std::string mode = "params";  // params | dfa-program
    std::string params_path, data_path, vocab_path;
    std::size_t index = 0, phi = 1;
    bool round = false;
    // dfa-program mode
    std::size_t states = 2, alphabet = 2;
    std::string word = "";
    std::uint64_t seed = 0;
    std::string out = "trace.json";
    bool to_stdout = false;
};

int cmd_rollout(const RolloutArgs& args) {
    std::string trace_text;
    if (args.mode == "params") {
        if (args.params_path.empty() || args.data_path.empty())
            throw ConfigError("rollout: --params and --data are required");
        const MhlaParams params = params_from_json(read_file(args.params_path));
        const Dataset data = dataset_from_jsonl(read_file(args.data_path));
        if (args.index >= data.size()) throw ConfigError("rollout: sample index out of range");
        std::optional<Vocabulary> vocab;
        if (!args.vocab_path.empty()) vocab = vocabulary_from_json(read_file(args.vocab_path));
        const ComputationHistory history =
            rollout(params, data.samples[args.index].z, args.phi, args.round, vocab);
        std::string steps = "[";
        for (std::size_t t = 0; t < history.steps.size(); ++t) {
            if (t) steps += ",";
            const Matrix& z = history.steps[t];
            const Vector last = z.col(z.cols() - 1);
            if (args.round && vocab) {
                steps += "\"" + vocab->symbols[round_token(last)] + "\"";
            } else {
                steps += "[";
                for (std::size_t i = 0; i < last.size(); ++i) {
                    if (i) steps += ",";
                    steps += format_double17(last[i]);
                }
                steps += "]";
            }
        }
        steps += "]";
        trace_text = "{\"mode\":\"params\",\"phi\":" + std::to_string(args.phi) +
                     ",\"rounded\":" + (args.round ? std::string("true") : std::string("false")) +
                     ",\"last_columns\":" + steps + "}";
    } else if (args.mode == "dfa-program") {
        std::vector<std::size_t> word;
        for (char c : args.word) {
            if (c < '0' || c > '9') throw ConfigError("rollout: word must be digits");
            word.push_back(static_cast<std::size_t>(c - '0'));
        }
        const AutomatonSpec spec = dfa_random(args.states, args.alphabet, args.seed);
        const DfaStepProgram prog = make_dfa_step_program(spec, word);
        const std::vector<std::size_t> visited = dfa_step_program_states(prog);
        const std::vector<std::size_t> oracle = dfa_execute(spec, word);
        std::string states_json = "[";
        for (std::size_t i = 0; i < visited.size(); ++i) {
            if (i) states_json += ",";
            states_json += std::to_string(visited[i]);
        }
        states_json += "]";
        trace_text = "{\"mode\":\"dfa-program\",\"automaton\":" + automaton_to_json(spec) +
                     ",\"word\":\"" + args.word + "\",\"visited_states\":" + states_json +
                     ",\"matches_oracle\":" + (visited == oracle ? "true" : "false") + "}";
    } else {
        throw ConfigError("rollout: unknown mode '" + args.mode + "'");
    }
    emit(args.out, trace_text + "\n", args.to_stdout);
    std::cerr << "rollout: wrote " << args.out << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string params_path, data_path;
    bool accuracy = false;
    std::string out = "eval.json";
    bool to_stdout = false;
};

int cmd_eval(const EvalArgs& args) {
    if (args.params_path.empty() || args.data_path.empty())
        throw ConfigError("eval: --params and --data are required");
    const MhlaParams params = params_from_json(read_file(args.params_path));
    const Dataset data = dataset_from_jsonl(read_file(args.data_path));
    std::string body = "{\"mse\":" + format_double17(mse(params, data)) +
                       ",\"n_samples\":" + std::to_string(data.size());
    if (args.accuracy)
        body += ",\"next_token_accuracy\":" + format_double17(next_token_accuracy(params, data));
    body += "}";
    emit(args.out, body + "\n", args.to_stdout);
    std::cerr << "eval: done\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mhla-lab: linear attention learning, certificates, and automata"};
    app.require_subcommand(1);

    std::string config_path;

    GenArgs gen;
    LearnArgs learn;
    CertifyArgs certify_args;
    SweepArgs sweep;
    RolloutArgs roll;
    EvalArgs eval_args;

    const std::uint64_t default_seed = [] {
        try {
            return env_default_seed();
        } catch (...) {
            return std::uint64_t{0};
        }
    }();
    gen.seed = learn.seed = sweep.seed = roll.seed = default_seed;

    auto* cg = app.add_subcommand("gen", "generate a dataset");
    cg->add_option("--config", config_path, "JSON config file; flags override its fields");
    std::map<std::string, CLI::Option*> gen_opts;
    gen_opts["task"] = cg->add_option("--task", gen.task, "random-mhla | assoc | dfa")->required(false);
    gen_opts["seed"] = cg->add_option("--seed", gen.seed);
    gen_opts["d"] = cg->add_option("--d", gen.d);
    gen_opts["n-max"] = cg->add_option("--n-max", gen.n_max);
    gen_opts["n"] = cg->add_option("--n", gen.n);
    gen_opts["heads"] = cg->add_option("--heads", gen.heads);
    gen_opts["states"] = cg->add_option("--states", gen.states);
    gen_opts["alphabet"] = cg->add_option("--alphabet", gen.alphabet);
    gen_opts["word-len"] = cg->add_option("--word-len", gen.word_len);
    gen_opts["unitary-fraction"] = cg->add_option("--unitary-fraction", gen.unitary_fraction);
    gen_opts["zero-noise"] = cg->add_flag("--zero-noise", gen.zero_noise);
    gen_opts["out"] = cg->add_option("--out", gen.out);
    gen_opts["meta-out"] = cg->add_option("--meta-out", gen.meta_out);
    gen_opts["vocab-out"] = cg->add_option("--vocab-out", gen.vocab_out);
    gen_opts["stdout"] = cg->add_flag("--stdout", gen.to_stdout);

    auto* cl = app.add_subcommand("learn", "fit a model to a dataset");
    cl->add_option("--config", config_path);
    std::map<std::string, CLI::Option*> learn_opts;
    learn_opts["data"] = cl->add_option("--data", learn.data);
    learn_opts["method"] = cl->add_option("--method", learn.method, "regression | gd");
    learn_opts["ridge"] = cl->add_option("--ridge", learn.ridge);
    learn_opts["exact-ols"] = cl->add_flag("--exact-ols", learn.exact_ols);
    learn_opts["rank-tol"] = cl->add_option("--rank-tol", learn.rank_tol);
    learn_opts["heads"] = cl->add_option("--heads", learn.heads);
    learn_opts["lr"] = cl->add_option("--lr", learn.lr);
    learn_opts["epochs"] = cl->add_option("--epochs", learn.epochs);
    learn_opts["seed"] = cl->add_option("--seed", learn.seed);
    learn_opts["threads"] = cl->add_option("--threads", learn.threads);
    learn_opts["out"] = cl->add_option("--out", learn.out);
    learn_opts["params-out"] = cl->add_option("--params-out", learn.params_out);
    learn_opts["residuals-out"] = cl->add_option("--residuals-out", learn.residuals_out);
    learn_opts["stdout"] = cl->add_flag("--stdout", learn.to_stdout);

    auto* cc = app.add_subcommand("certify", "identifiability certificate for a dataset");
    cc->add_option("--config", config_path);
    std::map<std::string, CLI::Option*> certify_opts;
    certify_opts["data"] = cc->add_option("--data", certify_args.data);
    certify_opts["centered-m2"] = cc->add_option("--centered-m2", certify_args.centered_m2);
    certify_opts["out"] = cc->add_option("--out", certify_args.out);
    certify_opts["spectrum-out"] = cc->add_option("--spectrum-out", certify_args.spectrum_out);
    certify_opts["stdout"] = cc->add_flag("--stdout", certify_args.to_stdout);

    auto* cs = app.add_subcommand("sweep", "mixture or dfa grids");
    cs->add_option("--config", config_path);
    std::map<std::string, CLI::Option*> sweep_opts;
    sweep_opts["kind"] = cs->add_option("--kind", sweep.kind, "mixture | dfa");
    sweep_opts["d"] = cs->add_option("--d", sweep.d);
    sweep_opts["n"] = cs->add_option("--n", sweep.n);
    sweep_opts["fractions"] = cs->add_option("--fractions", sweep.fractions);
    sweep_opts["seeds"] = cs->add_option("--seeds", sweep.seeds);
    sweep_opts["param"] = cs->add_option("--param", sweep.param);
    sweep_opts["values"] = cs->add_option("--values", sweep.values);
    sweep_opts["states"] = cs->add_option("--states", sweep.states);
    sweep_opts["alphabet"] = cs->add_option("--alphabet", sweep.alphabet);
    sweep_opts["word-len"] = cs->add_option("--word-len", sweep.word_len);
    sweep_opts["budgets"] = cs->add_option("--budgets", sweep.budgets);
    sweep_opts["accuracy-target"] = cs->add_option("--accuracy-target", sweep.accuracy_target);
    sweep_opts["test-n"] = cs->add_option("--test-n", sweep.test_n);
    sweep_opts["seed"] = cs->add_option("--seed", sweep.seed);
    sweep_opts["out"] = cs->add_option("--out", sweep.out);
    sweep_opts["stdout"] = cs->add_flag("--stdout", sweep.to_stdout);

    auto* cr = app.add_subcommand("rollout", "autoregressive trace");
    cr->add_option("--config", config_path);
    std::map<std::string, CLI::Option*> roll_opts;
    roll_opts["mode"] = cr->add_option("--mode", roll.mode, "params | dfa-program");
    roll_opts["params"] = cr->add_option("--params", roll.params_path);
    roll_opts["data"] = cr->add_option("--data", roll.data_path);
    roll_opts["vocab"] = cr->add_option("--vocab", roll.vocab_path);
    roll_opts["index"] = cr->add_option("--index", roll.index);
    roll_opts["phi"] = cr->add_option("--phi", roll.phi);
    roll_opts["round"] = cr->add_flag("--round", roll.round);
    roll_opts["states"] = cr->add_option("--states", roll.states);
    roll_opts["alphabet"] = cr->add_option("--alphabet", roll.alphabet);
    roll_opts["word"] = cr->add_option("--word", roll.word);
    roll_opts["seed"] = cr->add_option("--seed", roll.seed);
    roll_opts["out"] = cr->add_option("--out", roll.out);
    roll_opts["stdout"] = cr->add_flag("--stdout", roll.to_stdout);

    auto* ce = app.add_subcommand("eval", "evaluate saved params on a dataset");
    ce->add_option("--config", config_path);
    std::map<std::string, CLI::Option*> eval_opts;
    eval_opts["params"] = ce->add_option("--params", eval_args.params_path);
    eval_opts["data"] = ce->add_option("--data", eval_args.data_path);
    eval_opts["accuracy"] = ce->add_flag("--accuracy", eval_args.accuracy);
    eval_opts["out"] = ce->add_option("--out", eval_args.out);
    eval_opts["stdout"] = ce->add_flag("--stdout", eval_args.to_stdout);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        env_default_seed();  // surface malformed env values as config errors

        Config config;
        auto known_keys = [](const std::map<std::string, CLI::Option*>& opts) {
            std::set<std::string> keys;
            for (const auto& [k, _] : opts) keys.insert(k);
            return keys;
        };
        if (app.got_subcommand(cg)) {
            if (!config_path.empty()) config.load(config_path, known_keys(gen_opts));
            config.fill(gen_opts["task"], "task", gen.task);
            config.fill(gen_opts["seed"], "seed", gen.seed);
            config.fill(gen_opts["d"], "d", gen.d);
            config.fill(gen_opts["n-max"], "n-max", gen.n_max);
            config.fill(gen_opts["n"], "n", gen.n);
            config.fill(gen_opts["heads"], "heads", gen.heads);
            config.fill(gen_opts["states"], "states", gen.states);
            config.fill(gen_opts["alphabet"], "alphabet", gen.alphabet);
            config.fill(gen_opts["word-len"], "word-len", gen.word_len);
            config.fill(gen_opts["unitary-fraction"], "unitary-fraction", gen.unitary_fraction);
            config.fill(gen_opts["zero-noise"], "zero-noise", gen.zero_noise);
            config.fill(gen_opts["out"], "out", gen.out);
            config.fill(gen_opts["meta-out"], "meta-out", gen.meta_out);
            config.fill(gen_opts["vocab-out"], "vocab-out", gen.vocab_out);
            if (gen.task.empty()) throw ConfigError("gen: --task is required");
            return cmd_gen(gen);
        }
        if (app.got_subcommand(cl)) {
            if (!config_path.empty()) config.load(config_path, known_keys(learn_opts));
            config.fill(learn_opts["data"], "data", learn.data);
            config.fill(learn_opts["method"], "method", learn.method);
            config.fill(learn_opts["ridge"], "ridge", learn.ridge);
            config.fill(learn_opts["exact-ols"], "exact-ols", learn.exact_ols);
            config.fill(learn_opts["rank-tol"], "rank-tol", learn.rank_tol);
            config.fill(learn_opts["heads"], "heads", learn.heads);
            config.fill(learn_opts["lr"], "lr", learn.lr);
            config.fill(learn_opts["epochs"], "epochs", learn.epochs);
            config.fill(learn_opts["seed"], "seed", learn.seed);
            config.fill(learn_opts["threads"], "threads", learn.threads);
            config.fill(learn_opts["out"], "out", learn.out);
            config.fill(learn_opts["params-out"], "params-out", learn.params_out);
            config.fill(learn_opts["residuals-out"], "residuals-out", learn.residuals_out);
            return cmd_learn(learn);
        }
        if (app.got_subcommand(cc)) {
            if (!config_path.empty()) config.load(config_path, known_keys(certify_opts));
            config.fill(certify_opts["data"], "data", certify_args.data);
            config.fill(certify_opts["centered-m2"], "centered-m2", certify_args.centered_m2);
            config.fill(certify_opts["out"], "out", certify_args.out);
            config.fill(certify_opts["spectrum-out"], "spectrum-out", certify_args.spectrum_out);
            return cmd_certify(certify_args);
        }
        if (app.got_subcommand(cs)) {
            if (!config_path.empty()) config.load(config_path, known_keys(sweep_opts));
            config.fill(sweep_opts["kind"], "kind", sweep.kind);
            config.fill(sweep_opts["d"], "d", sweep.d);
            config.fill(sweep_opts["n"], "n", sweep.n);
            config.fill(sweep_opts["fractions"], "fractions", sweep.fractions);
            config.fill(sweep_opts["seeds"], "seeds", sweep.seeds);
            config.fill(sweep_opts["param"], "param", sweep.param);
            config.fill(sweep_opts["values"], "values", sweep.values);
            config.fill(sweep_opts["states"], "states", sweep.states);
            config.fill(sweep_opts["alphabet"], "alphabet", sweep.alphabet);
            config.fill(sweep_opts["word-len"], "word-len", sweep.word_len);
            config.fill(sweep_opts["budgets"], "budgets", sweep.budgets);
            config.fill(sweep_opts["accuracy-target"], "accuracy-target", sweep.accuracy_target);
            config.fill(sweep_opts["test-n"], "test-n", sweep.test_n);
            config.fill(sweep_opts["seed"], "seed", sweep.seed);
            config.fill(sweep_opts["out"], "out", sweep.out);
            return cmd_sweep(sweep);
        }
        if (app.got_subcommand(cr)) {
            if (!config_path.empty()) config.load(config_path, known_keys(roll_opts));
            config.fill(roll_opts["mode"], "mode", roll.mode);
            config.fill(roll_opts["params"], "params", roll.params_path);
            config.fill(roll_opts["data"], "data", roll.data_path);
            config.fill(roll_opts["vocab"], "vocab", roll.vocab_path);
            config.fill(roll_opts["index"], "index", roll.index);
            config.fill(roll_opts["phi"], "phi", roll.phi);
            config.fill(roll_opts["round"], "round", roll.round);
            config.fill(roll_opts["states"], "states", roll.states);
            config.fill(roll_opts["alphabet"], "alphabet", roll.alphabet);
            config.fill(roll_opts["word"], "word", roll.word);
            config.fill(roll_opts["seed"], "seed", roll.seed);
            config.fill(roll_opts["out"], "out", roll.out);
            return cmd_rollout(roll);
        }
        if (app.got_subcommand(ce)) {
            if (!config_path.empty()) config.load(config_path, known_keys(eval_opts));
            config.fill(eval_opts["params"], "params", eval_args.params_path);
            config.fill(eval_opts["data"], "data", eval_args.data_path);
            config.fill(eval_opts["accuracy"], "accuracy", eval_args.accuracy);
            config.fill(eval_opts["out"], "out", eval_args.out);
            return cmd_eval(eval_args);
        }
        throw ConfigError("no subcommand selected");
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ContractError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    }
}
