#pragma once

// Command-line front end. dispatch() is what the halsub binary calls; it is
// exposed here so tests can drive it in-process.
//
// Exit codes: 0 success, 1 internal error, 2 invalid input or flags,
// 3 file-format error.

#include "halsub/metrics.hpp"
#include "halsub/nullifier.hpp"
#include "halsub/probe.hpp"
#include "halsub/subspace.hpp"
#include "halsub/synthetics.hpp"
#include "halsub/tensor_store.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace halsub::cli {

enum ExitCode : int { kOk = 0, kInternal = 1, kInvalid = 2, kFormat = 3 };

inline std::vector<int> parse_int_list(const std::string& text)
{
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoi(item, &used));
            if (used != item.size()) throw InvalidInput("bad integer list: " + text);
        } catch (const std::logic_error&) {
            throw InvalidInput("bad integer list: " + text);
        }
    }
    require(!out.empty(), "empty integer list");
    return out;
}

inline std::vector<double> parse_double_list(const std::string& text)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw InvalidInput("bad number list: " + text);
        } catch (const std::logic_error&) {
            throw InvalidInput("bad number list: " + text);
        }
    }
    require(!out.empty(), "empty number list");
    return out;
}

inline std::vector<int> expand_range(const LayerRange& r)
{
    std::vector<int> out;
    for (int l = r.first; l <= r.last; ++l) out.push_back(l);
    return out;
}

inline void write_text(const std::string& path, const std::string& text)
{
    const fs::path p(path);
    if (p.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(p.parent_path(), ec);
    }
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out) throw IoError("write failed for " + path);
}

inline nlohmann::json read_json_file(const std::string& path)
{
    const auto text = read_file(path);
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path + ": invalid JSON: " + e.what());
    }
}

/// JSON-lines captions: {"id": ..., "caption": "..."} per line.
inline std::vector<std::pair<std::string, std::string>> read_captions(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            throw FormatError(path + ":" + std::to_string(lineno) + ": invalid JSON");
        }
        if (!j.is_object() || !j.contains("id") || !j.contains("caption") || !j["caption"].is_string())
            throw FormatError(path + ":" + std::to_string(lineno) + ": expected {id, caption}");
        const auto& id = j["id"];
        out.emplace_back(id.is_string() ? id.get<std::string>() : id.dump(), j["caption"].get<std::string>());
    }
    return out;
}

inline std::map<std::string, std::vector<std::string>> read_object_map(const std::string& path)
{
    const auto j = read_json_file(path);
    try {
        return j.get<std::map<std::string, std::vector<std::string>>>();
    } catch (const nlohmann::json::exception&) {
        throw FormatError(path + ": expected {id: [objects]}");
    }
}

inline std::string fixed(double v, int digits)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// Flags coming from --config are inserted ahead of the user's flags; with
// TakeLast semantics the user's flags win.
inline std::vector<std::string> config_to_args(const std::string& path)
{
    const auto j = read_json_file(path);
    if (!j.is_object()) throw InvalidInput("config file must hold a JSON object");
    std::vector<std::string> args;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string flag = "--" + it.key();
        const auto& v = it.value();
        if (v.is_boolean()) {
            if (v.get<bool>()) args.push_back(flag);
        } else if (v.is_array()) {
            std::string joined;
            for (const auto& e : v) {
                if (!joined.empty()) joined += ",";
                joined += e.is_string() ? e.get<std::string>() : e.dump();
            }
            args.push_back(flag);
            args.push_back(joined);
        } else {
            args.push_back(flag);
            args.push_back(v.is_string() ? v.get<std::string>() : v.dump());
        }
    }
    return args;
}

inline nlohmann::json resolved_config(const CLI::App& sub)
{
    nlohmann::json j;
    j["subcommand"] = sub.get_name();
    for (const CLI::Option* opt : sub.get_options()) {
        const auto name = opt->get_single_name();
        if (name == "help" || name == "config") continue;
        if (opt->count() > 0) {
            const auto& res = opt->results();
            j[name] = opt->get_expected_max() == 0 ? nlohmann::json(true) : nlohmann::json(res.back());
        } else if (opt->get_expected_max() == 0) {
            j[name] = false;
        } else if (!opt->get_default_str().empty()) {
            j[name] = opt->get_default_str();
        } else {
            j[name] = nullptr;
        }
    }
    return j;
}

inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"halsub: hallucination-subspace extraction and nullification toolkit", "halsub"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    std::function<int()> action;
    auto add_config = [](CLI::App* sub) { sub->add_option("--config", "JSON file of flag defaults (flags win)"); };

    // extract ---------------------------------------------------------------
    std::string ex_clean, ex_cf, ex_out, ex_layers = "16..32";
    int ex_rank = 8;
    auto* extract = app.add_subcommand("extract", "Build a basis bank from paired clean/counterfactual dumps");
    extract->add_option("--clean", ex_clean, "clean HSD directory")->required();
    extract->add_option("--cf", ex_cf, "counterfactual HSD directory")->required();
    extract->add_option("--rank", ex_rank, "subspace rank r");
    extract->add_option("--layers", ex_layers, "inclusive layer range a..b");
    extract->add_option("--out", ex_out, "output HBB directory")->required();
    add_config(extract);
    extract->callback([&] {
        action = [&] {
            const auto range = parse_layer_range(ex_layers);
            const auto clean = read_hsd(ex_clean);
            const auto cf = read_hsd(ex_cf);
            const auto bank = build_bank(clean, cf, expand_range(range), ex_rank);
            write_bank(bank, ex_out);
            out << "wrote bank: " << bank.layers.size() << " layers, rank " << bank.rank << ", d " << bank.hidden_dim
                << ", source_hash " << bank.source_hash << "\n";
            for (const auto& [layer, w] : bank.warnings) out << "warning: " << w << "\n";
            return kOk;
        };
    });

    // nullify ---------------------------------------------------------------
    std::string nu_bank, nu_input, nu_out, nu_layers = "16..32";
    auto* nullify = app.add_subcommand("nullify", "Project the hallucination subspace out of a dump");
    nullify->add_option("--bank", nu_bank, "HBB directory")->required();
    nullify->add_option("--input", nu_input, "HSD directory")->required();
    nullify->add_option("--layers", nu_layers, "active layer range a..b");
    nullify->add_option("--out", nu_out, "output HSD directory")->required();
    add_config(nullify);
    nullify->callback([&] {
        action = [&] {
            Nullifier nullifier(NullifierConfig{read_bank(nu_bank), parse_layer_range(nu_layers), true, true});
            auto dump = read_hsd(nu_input);
            int touched = 0;
            for (auto& [layer, block] : dump.blocks)
                if (nullifier.is_active(layer)) {
                    block = nullifier.nullify_stream(block, layer);
                    ++touched;
                }
            write_hsd(dump, nu_out);
            out << "nullified " << touched << " layers, " << dump.manifest.total_rows() << " rows each\n";
            return kOk;
        };
    });

    // probe -----------------------------------------------------------------
    std::string pr_clean, pr_pert, pr_out, pr_csv;
    int pr_train = 400, pr_test = 1000;
    std::uint64_t pr_seed = 0;
    ProbeHyperparams pr_hp;
    auto* probe = app.add_subcommand("probe", "Layer-wise linear probes, clean vs perturbed");
    probe->add_option("--clean", pr_clean, "HSD with clean records")->required();
    probe->add_option("--perturbed", pr_pert, "HSD with counterfactual records")->required();
    probe->add_option("--n-train", pr_train, "training samples");
    probe->add_option("--n-test", pr_test, "test samples");
    probe->add_option("--seed", pr_seed, "split seed");
    probe->add_option("--l2", pr_hp.l2_lambda, "L2 penalty");
    probe->add_option("--lr", pr_hp.learning_rate, "initial learning rate");
    probe->add_option("--max-iters", pr_hp.max_iters, "gradient-descent iterations");
    probe->add_option("--tol", pr_hp.tol, "gradient-norm tolerance");
    probe->add_option("--out", pr_out, "report JSON")->required();
    probe->add_option("--csv", pr_csv, "optional CSV series");
    add_config(probe);
    probe->callback([&] {
        action = [&] {
            const auto report = layerwise_probe(read_hsd(pr_clean), read_hsd(pr_pert), pr_train, pr_test, pr_seed, pr_hp);
            write_text(pr_out, report.to_json().dump(2) + "\n");
            if (!pr_csv.empty()) write_text(pr_csv, report.to_csv());
            for (const auto& r : report.layers)
                out << "layer " << r.layer << ": accuracy " << fixed(r.metrics.accuracy, 4) << " f1 "
                    << fixed(r.metrics.f1, 4) << "\n";
            return kOk;
        };
    });

    // synth -----------------------------------------------------------------
    SyntheticSpec sy;
    std::string sy_layers = "0..0", sy_out;
    auto* synth = app.add_subcommand("synth", "Generate a planted-subspace dump pair");
    synth->add_option("--d", sy.d, "hidden dimension");
    synth->add_option("--k", sy.k, "planted rank");
    synth->add_option("--samples", sy.M, "clean samples M");
    synth->add_option("--variants", sy.B, "counterfactual variants per sample B");
    synth->add_option("--shift", sy.shift, "mean coefficient along each planted direction");
    synth->add_option("--coeff-noise", sy.coeff_noise, "coefficient jitter std");
    synth->add_option("--ambient-noise", sy.ambient_noise, "isotropic noise std");
    synth->add_option("--seed", sy.seed, "generator seed");
    synth->add_option("--layers", sy_layers, "layer range a..b");
    synth->add_option("--out", sy_out, "output directory (clean/, cf/, planted/)")->required();
    add_config(synth);
    synth->callback([&] {
        action = [&] {
            sy.layers = expand_range(parse_layer_range(sy_layers));
            const auto data = gen_planted(sy);
            const fs::path root(sy_out);
            write_hsd(data.clean, root / "clean");
            write_hsd(data.cf, root / "cf");
            BasisBank planted;
            planted.hidden_dim = sy.d;
            planted.rank = sy.k;
            planted.layers = sy.layers;
            for (int l : sy.layers) planted.bases.emplace(l, data.planted);
            planted.source_hash = pair_source_hash(data.clean, data.cf);
            write_bank(planted, root / "planted");
            out << "wrote " << sy.M << " clean and " << sy.M * sy.B << " counterfactual samples, d " << sy.d << ", k "
                << sy.k << "\n";
            return kOk;
        };
    });

    // sweep-rank ------------------------------------------------------------
    std::string sw_clean, sw_cf, sw_layers = "16..32", sw_ranks = "2,4,8,16,32", sw_planted, sw_out, sw_csv;
    auto* sweep = app.add_subcommand("sweep-rank", "Build one bank per rank and score each");
    sweep->add_option("--clean", sw_clean, "clean HSD directory")->required();
    sweep->add_option("--cf", sw_cf, "counterfactual HSD directory")->required();
    sweep->add_option("--layers", sw_layers, "inclusive layer range a..b");
    sweep->add_option("--ranks", sw_ranks, "comma-separated ranks");
    sweep->add_option("--planted", sw_planted, "planted HBB: score = max principal angle to it");
    sweep->add_option("--out", sw_out, "report JSON")->required();
    sweep->add_option("--csv", sw_csv, "optional CSV series");
    add_config(sweep);
    sweep->callback([&] {
        action = [&] {
            const auto clean = read_hsd(sw_clean);
            const auto cf = read_hsd(sw_cf);
            BankEvaluator eval;
            std::string score_name = "residual_energy";
            if (!sw_planted.empty()) {
                const auto planted = read_bank(sw_planted);
                score_name = "max_principal_angle";
                eval = [planted](const BasisBank& bank) {
                    double worst = 0.0;
                    for (int l : bank.layers) {
                        const Matrix q = orthonormalize(planted.basis(l));
                        const auto angles = principal_angles(bank.basis(l), q);
                        if (!angles.empty()) worst = std::max(worst, angles.back());
                    }
                    return worst;
                };
            } else {
                eval = residual_energy_evaluator(clean, cf);
            }
            const auto report = sweep_rank(clean, cf, expand_range(parse_layer_range(sw_layers)), parse_int_list(sw_ranks), eval);
            auto j = report.to_json();
            j["score"] = score_name;
            write_text(sw_out, j.dump(2) + "\n");
            if (!sw_csv.empty()) {
                std::ostringstream os;
                os.precision(17);
                os << "rank," << score_name << "\n";
                for (const auto& e : report.entries) os << e.rank << ',' << e.score << '\n';
                write_text(sw_csv, os.str());
            }
            for (const auto& e : report.entries) out << "rank " << e.rank << ": " << score_name << " " << e.score << "\n";
            return kOk;
        };
    });

    // decode ----------------------------------------------------------------
    ToyDecoderSpec de;
    std::string de_prompt = "0", de_bank, de_layers, de_out;
    int de_steps = 32, de_inject_row = -1;
    std::uint64_t de_inject_seed = 0;
    bool de_inject_random = false;
    double de_scale = 1.0;
    auto* decode = app.add_subcommand("decode", "Greedy toy decode with optional injection and nullifier");
    decode->add_option("--d", de.d, "state dimension");
    decode->add_option("--vocab", de.vocab, "vocabulary size");
    decode->add_option("--reserved", de.reserved, "state coordinates never written by the recurrence");
    decode->add_option("--seed", de.seed, "decoder seed");
    decode->add_option("--prompt", de_prompt, "comma-separated prompt token ids");
    decode->add_option("--steps", de_steps, "tokens to generate");
    decode->add_option("--bank", de_bank, "HBB directory; enables the nullifier");
    decode->add_option("--layers", de_layers, "active layer range (default: every bank layer)");
    decode->add_option("--inject-row", de_inject_row, "inject basis row j of the first active bank layer");
    decode->add_flag("--inject-random", de_inject_random, "inject a seeded random unit direction");
    decode->add_option("--inject-seed", de_inject_seed, "seed for --inject-random");
    decode->add_option("--scale", de_scale, "injection scale s");
    decode->add_option("--out", de_out, "optional JSON output");
    add_config(decode);
    decode->callback([&] {
        action = [&] {
            const ToyDecoder decoder(de);
            std::optional<Nullifier> nullifier;
            std::optional<BasisBank> bank;
            if (!de_bank.empty()) {
                bank = read_bank(de_bank);
                if (de_layers.empty())
                    nullifier.emplace(*bank);
                else
                    nullifier.emplace(NullifierConfig{*bank, parse_layer_range(de_layers), true, true});
            }
            std::optional<Injection> injection;
            require(!(de_inject_row >= 0 && de_inject_random), "choose one of --inject-row and --inject-random");
            if (de_inject_row >= 0) {
                require(nullifier && !nullifier->hook_layers().empty(), "--inject-row needs --bank");
                const auto& basis = bank->basis(nullifier->hook_layers().front());
                require(de_inject_row < basis.rows(), "--inject-row exceeds the basis rows");
                injection = Injection{basis.row(de_inject_row).transpose(), de_scale};
            } else if (de_inject_random) {
                CounterRng rng(de_inject_seed, 99);
                Vector g(de.d);
                for (Index i = 0; i < g.size(); ++i) g(i) = rng.gaussian();
                injection = Injection{g.normalized(), de_scale};
            }
            const auto tokens = decoder.decode(parse_int_list(de_prompt), de_steps, injection,
                                               nullifier ? &*nullifier : nullptr);
            const nlohmann::json j{{"tokens", tokens}};
            if (!de_out.empty()) write_text(de_out, j.dump(2) + "\n");
            out << j.dump() << "\n";
            return kOk;
        };
    });

    // chair -----------------------------------------------------------------
    std::string ch_captions, ch_gt, ch_lex, ch_out;
    auto* chair = app.add_subcommand("chair", "CHAIR_S / CHAIR_I over generated captions");
    chair->add_option("--captions", ch_captions, "JSON-lines {id, caption}")->required();
    chair->add_option("--gt", ch_gt, "JSON {id: [objects]}")->required();
    chair->add_option("--lexicon", ch_lex, "lexicon JSON")->required();
    chair->add_option("--out", ch_out, "optional report JSON");
    add_config(chair);
    chair->callback([&] {
        action = [&] {
            const auto lexicon = ObjectLexicon::from_json(read_json_file(ch_lex));
            const auto caps = read_captions(ch_captions);
            const auto gt = read_object_map(ch_gt);
            std::vector<std::string> texts;
            std::vector<std::set<std::string>> gts;
            for (const auto& [id, text] : caps) {
                auto it = gt.find(id);
                require(it != gt.end(), "no ground truth for caption id " + id);
                texts.push_back(text);
                gts.emplace_back(it->second.begin(), it->second.end());
            }
            const auto r = chair_scores(texts, gts, lexicon);
            const nlohmann::json j{{"chair_s", r.chair_s},
                                   {"chair_i", r.chair_i},
                                   {"sentences", r.counts.sentences},
                                   {"hallucinated_sentences", r.counts.hallucinated_sentences},
                                   {"mentions", r.counts.mentions},
                                   {"hallucinated_mentions", r.counts.hallucinated_mentions},
                                   {"no_sentences", r.no_sentences},
                                   {"no_mentions", r.no_mentions}};
            if (!ch_out.empty()) write_text(ch_out, j.dump(2) + "\n");
            out << "CHAIR_S " << fixed(r.chair_s, 4) << " CHAIR_I " << fixed(r.chair_i, 4) << "\n";
            return kOk;
        };
    });

    // opope -----------------------------------------------------------------
    std::string op_captions, op_polls, op_gt, op_lex, op_out;
    double op_beta = 0.2;
    auto* opope = app.add_subcommand("opope", "Offline polling accuracy / precision / recall / F-beta");
    opope->add_option("--captions", op_captions, "JSON-lines {id, caption}")->required();
    opope->add_option("--polls", op_polls, "JSON {id: [polled objects]}")->required();
    opope->add_option("--gt", op_gt, "JSON {id: [objects]}")->required();
    opope->add_option("--lexicon", op_lex, "lexicon JSON")->required();
    opope->add_option("--beta", op_beta, "F-beta weight");
    opope->add_option("--out", op_out, "optional report JSON");
    add_config(opope);
    opope->callback([&] {
        action = [&] {
            const auto lexicon = ObjectLexicon::from_json(read_json_file(op_lex));
            const auto caps = read_captions(op_captions);
            const auto polls = read_object_map(op_polls);
            const auto gt = read_object_map(op_gt);
            Confusion total;
            for (const auto& [id, text] : caps) {
                auto p = polls.find(id);
                auto g = gt.find(id);
                require(p != polls.end(), "no poll list for caption id " + id);
                require(g != gt.end(), "no ground truth for caption id " + id);
                total += opope_poll(text, p->second, std::set<std::string>(g->second.begin(), g->second.end()), lexicon);
            }
            const double f = fbeta(total.precision(), total.recall(), op_beta);
            const nlohmann::json j{{"tp", total.tp},
                                   {"fp", total.fp},
                                   {"fn", total.fn},
                                   {"tn", total.tn},
                                   {"accuracy", total.accuracy()},
                                   {"precision", total.precision()},
                                   {"recall", total.recall()},
                                   {"beta", op_beta},
                                   {"f_beta", f}};
            if (!op_out.empty()) write_text(op_out, j.dump(2) + "\n");
            out << "accuracy " << fixed(total.accuracy(), 4) << " precision " << fixed(total.precision(), 4)
                << " recall " << fixed(total.recall(), 4) << " f_beta " << fixed(f, 4) << "\n";
            return kOk;
        };
    });

    // fbeta -----------------------------------------------------------------
    double fb_p = 0.0, fb_r = 0.0, fb_beta = 0.2;
    auto* fb = app.add_subcommand("fbeta", "F-beta from precision and recall");
    fb->add_option("--precision", fb_p, "precision in [0,1]")->required();
    fb->add_option("--recall", fb_r, "recall in [0,1]")->required();
    fb->add_option("--beta", fb_beta, "beta > 0");
    add_config(fb);
    fb->callback([&] {
        action = [&] {
            out << fixed(fbeta(fb_p, fb_r, fb_beta), 4) << "\n";
            return kOk;
        };
    });

    // noise-sweep -----------------------------------------------------------
    std::string ns_clean, ns_cf, ns_bank, ns_sigmas = "0,0.1,0.5,1", ns_out, ns_csv;
    std::uint64_t ns_seed = 0;
    auto* noise = app.add_subcommand("noise-sweep", "In-subspace energy under feature noise, before/after nullification");
    noise->add_option("--clean", ns_clean, "clean HSD directory")->required();
    noise->add_option("--cf", ns_cf, "counterfactual HSD directory")->required();
    noise->add_option("--bank", ns_bank, "HBB directory")->required();
    noise->add_option("--sigmas", ns_sigmas, "comma-separated noise levels");
    noise->add_option("--seed", ns_seed, "noise seed");
    noise->add_option("--out", ns_out, "report JSON")->required();
    noise->add_option("--csv", ns_csv, "optional CSV series");
    add_config(noise);
    noise->callback([&] {
        action = [&] {
            const auto report = feature_noise_sweep(read_hsd(ns_clean), read_hsd(ns_cf), read_bank(ns_bank),
                                                    parse_double_list(ns_sigmas), ns_seed);
            write_text(ns_out, report.to_json().dump(2) + "\n");
            if (!ns_csv.empty()) write_text(ns_csv, report.to_csv());
            for (const auto& e : report.entries) {
                double before = 0.0, after = 0.0;
                for (const auto& l : e.layers) {
                    before += l.energy_before;
                    after += l.energy_after;
                }
                out << "sigma " << e.sigma << ": in-subspace energy " << before / static_cast<double>(e.layers.size())
                    << " -> " << after / static_cast<double>(e.layers.size()) << "\n";
            }
            return kOk;
        };
    });

    // Splice --config defaults in right after the subcommand name.
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    try {
        for (std::size_t i = 0; i + 1 < args.size(); ++i) {
            if (args[i] == "--config") {
                auto extra = config_to_args(args[i + 1]);
                args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + 2));
                args.insert(args.begin() + 1, extra.begin(), extra.end());
                break;
            }
        }
    } catch (const FormatError& e) {
        err << "error: " << e.what() << "\n";
        return kFormat;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kInvalid;
    }

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(std::move(reversed));
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kInvalid;
    }

    for (const auto* sub : app.get_subcommands()) err << resolved_config(*sub).dump() << "\n";

    try {
        return action ? action() : kInvalid;
    } catch (const InvalidInput& e) {
        err << "invalid input: " << e.what() << "\n";
        return kInvalid;
    } catch (const IoError& e) {
        err << "i/o error: " << e.what() << "\n";
        return kInvalid;
    } catch (const FormatError& e) {
        err << "format error: " << e.what() << "\n";
        return kFormat;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kInternal;
    }
}

} // namespace halsub::cli
