/* Copyright 2026 The schemabot Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <pthread.h>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "schemabot/config.hpp"
#include "schemabot/eval.hpp"
#include "schemabot/schema.hpp"
#include "schemabot/serve.hpp"

#ifndef SCHEMABOT_DEFAULT_CONFIG
#define SCHEMABOT_DEFAULT_CONFIG "data/config/engine.json"
#endif

using nlohmann::json;
using namespace schemabot;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

struct Common {
    std::string config = SCHEMABOT_DEFAULT_CONFIG;
    std::string backend;  // overrides the config file
    bool no_dst = false;
    bool no_db = false;
    bool no_policy = false;
    bool combined = false;
    int retry_budget = -1;
    bool lexicalized_history = false;  // eval only
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "Engine config (JSON)")->capture_default_str();
    cmd->add_option("--backend", c.backend, "keyword | scripted:<file> | remote");
    cmd->add_flag("--no-dst", c.no_dst, "Ablate the DST prompter");
    cmd->add_flag("--no-db", c.no_db, "Ablate the database retriever");
    cmd->add_flag("--no-policy", c.no_policy, "Ablate the policy skeleton");
    cmd->add_flag("--combined", c.combined, "One policy call for action and response");
    cmd->add_option("--retry-budget", c.retry_budget, "Re-queries after an unparseable completion");
}

struct Loaded {
    std::shared_ptr<Engine> engine;
    BackendProvider backends;
    ServeOptions serve;
};

Loaded load(const Common& c) {
    EngineConfig cfg = load_engine_config(c.config);
    PipelineConfig& p = cfg.engine->config;
    if (c.no_dst) p.use_dst_prompter = false;
    if (c.no_db) p.use_db = false;
    if (c.no_policy) p.use_policy_prompter = false;
    if (c.combined) p.combined_action_response = true;
    if (c.retry_budget >= 0) p.parse_retry_budget = c.retry_budget;
    Loaded out{cfg.engine, {}, cfg.serve};
    out.backends = c.backend.empty() ? make_backend_provider(cfg.backend, cfg.base_dir)
                                     : make_backend_provider(json(c.backend), ".");
    return out;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << content;
}

std::string ablation_label(const PipelineConfig& p) {
    std::string label = "schemabot";
    if (!p.use_policy_prompter) label += " -policy";
    if (!p.use_db) label += " -DB";
    if (!p.use_dst_prompter) label += " -belief";
    return label;
}

int cmd_validate(const std::vector<std::string>& files) {
    int rc = kOk;
    for (const auto& f : files) {
        try {
            const auto schemas = parse_schema_bundle(read_text_file(f));
            for (const auto& s : schemas) {
                for (const auto& d : validate_schema(s)) std::cout << f << ": " << to_string(d) << "\n";
                std::cout << f << ": " << s.domain << " ok (" << s.policy.turns.size() << " template turns, "
                          << s.belief.slots.size() << " slots)\n";
            }
        } catch (const ValidationError& e) {
            for (const auto& d : e.diagnostics()) std::cerr << f << ": " << to_string(d) << "\n";
            rc = kFailed;
        } catch (const Error& e) {
            std::cerr << f << ": " << e.code() << ": " << e.what() << "\n";
            rc = kFailed;
        }
    }
    return rc;
}

int cmd_extend(const std::string& schema_path, const std::string& edits_path, const std::string& out_path) {
    try {
        const TaskSchema base = parse_schema(read_text_file(schema_path));
        const TaskSchema ext = edit_skeleton(base, parse_edits(read_text_file(edits_path)));
        const std::string text = serialize_schema(ext);
        if (out_path.empty() || out_path == "-") {
            std::cout << text;
        } else {
            write_file(out_path, text);
        }
        std::cerr << ext.domain << ": " << base.policy.turns.size() << " -> " << ext.policy.turns.size()
                  << " template turns\n";
        return kOk;
    } catch (const ValidationError& e) {
        for (const auto& d : e.diagnostics()) std::cerr << to_string(d) << "\n";
        return kFailed;
    } catch (const UnknownTurnId& e) {
        std::cerr << e.code() << ": " << e.what() << "\n";
        return kFailed;
    }
}

int cmd_chat(const Common& c, const std::vector<std::string>& schema_ids, bool verbose) {
    Loaded l = load(c);
    DialogSession s = open_session(l.engine, l.backends("chat"), schema_ids);
    std::cout << "schemabot chat over [";
    for (std::size_t i = 0; i < s.schemas.size(); ++i) std::cout << (i ? ", " : "") << s.schemas[i].domain;
    std::cout << "]; empty line or /quit to exit\n";
    std::string line;
    while (std::cout << "User: " << std::flush, std::getline(std::cin, line)) {
        if (line.empty() || line == "/quit") break;
        try {
            const TurnRecord& r = step(s, line);
            if (verbose) {
                std::cout << "  belief: " << r.belief_sql << "\n  db: " << r.db_count << " match(es)\n  action: "
                          << r.action.str() << "\n  delex: " << r.delex.text << "\n";
            }
            std::cout << "System: " << r.final_text << "\n";
        } catch (const BackendError& e) {
            std::cout << "[backend error: " << e.what() << "]\n";
        }
    }
    return kOk;
}

int cmd_serve(const Common& c, std::string host, int port, const std::string& port_file, const std::string& log,
              bool restore) {
    Loaded l = load(c);
    ServeOptions opt = l.serve;
    if (!host.empty()) opt.host = host;
    if (port >= 0) opt.port = port;
    if (!log.empty()) opt.log_path = log;

    // Signals are taken synchronously by a dedicated thread.
    sigset_t sigs;
    sigemptyset(&sigs);
    sigaddset(&sigs, SIGINT);
    sigaddset(&sigs, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &sigs, nullptr);

    auto service = std::make_shared<ChatService>(l.engine, l.backends, opt);
    if (restore && !opt.log_path.empty()) {
        std::cerr << "restored " << service->restore(opt.log_path) << " session(s)\n";
    }
    HttpServer server(service);
    const int bound = server.bind(opt.host, opt.port);
    if (!port_file.empty()) {
        // Readers poll for the file; rename makes it appear complete.
        write_file(port_file + ".tmp", std::to_string(bound) + "\n");
        std::filesystem::rename(port_file + ".tmp", port_file);
    }
    std::cerr << "listening on http://" << opt.host << ":" << bound << "\n";

    std::thread waiter([&] {
        int sig = 0;
        sigwait(&sigs, &sig);
        server.stop();
    });
    server.listen();
    // listen() can also return on its own; wake the waiter in that case.
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    return kOk;
}

EvalConfig eval_config(const Loaded& l, std::size_t workers, bool teacher, bool lexicalized) {
    EvalConfig ec;
    auto provider = l.backends;
    ec.backend_factory = [provider](const EvalDialog& d) { return provider(d.id); };
    ec.workers = workers;
    ec.teacher_forcing = teacher;
    ec.delex_history = !lexicalized;
    ec.label = ablation_label(l.engine->config);
    return ec;
}

int cmd_eval_e2e(const Common& c, const std::string& corpus_path, std::size_t workers, bool teacher,
                 const std::string& report_path, const std::string& transcript_path, double min_combined,
                 bool as_json) {
    Loaded l = load(c);
    const auto corpus = load_corpus(corpus_path);
    const EvalReport rep = run_e2e_eval(corpus, l.engine, eval_config(l, workers, teacher, c.lexicalized_history));
    if (!report_path.empty()) write_file(report_path, to_json(rep).dump(2) + "\n");
    if (!transcript_path.empty()) write_file(transcript_path, transcript_jsonl(rep));
    if (as_json) {
        std::cout << to_json(rep).dump(2) << "\n";
    } else {
        std::cout << format_table(std::span<const EvalReport>(&rep, 1));
        for (const auto& row : rep.rows) {
            if (!row.error.empty()) std::cout << "  " << row.id << ": " << row.error << "\n";
        }
    }
    return rep.combined + 1e-9 >= min_combined ? kOk : kFailed;
}

int cmd_eval_action(const Common& c, const std::string& corpus_path, std::size_t workers, bool teacher,
                    const std::string& report_path, double min_f1) {
    Loaded l = load(c);
    const auto corpus = load_corpus(corpus_path);
    const ActionReport rep = run_action_eval(corpus, l.engine, eval_config(l, workers, teacher, c.lexicalized_history));
    const json j = to_json(rep);
    if (!report_path.empty()) write_file(report_path, j.dump(2) + "\n");
    std::cout << j.dump(2) << "\n";
    return rep.weighted_f1 + 1e-9 >= min_f1 ? kOk : kFailed;
}

int cmd_oracle(const Common& c, const std::string& corpus_path, const std::string& out_path) {
    EngineConfig cfg = load_engine_config(c.config);
    PipelineConfig p = cfg.engine->config;
    if (c.no_dst) p.use_dst_prompter = false;
    if (c.combined) p.combined_action_response = true;
    json dialogs = json::object();
    for (const auto& d : load_corpus(corpus_path)) dialogs[d.id] = oracle_completions(d, p);
    const std::string text = json{{"dialogs", dialogs}}.dump(2) + "\n";
    if (out_path.empty() || out_path == "-") {
        std::cout << text;
    } else {
        write_file(out_path, text);
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"schemabot: schema-guided task-oriented dialog engine"};
    app.require_subcommand(1);

    Common common;

    std::vector<std::string> schema_files;
    auto* validate = app.add_subcommand("validate-schema", "Check schema files");
    validate->add_option("files", schema_files, "Schema JSON files")->required()->check(CLI::ExistingFile);

    std::string ext_schema, ext_edits, ext_out;
    auto* extend = app.add_subcommand("extend-schema", "Apply a skeleton edit file to a schema");
    extend->add_option("schema", ext_schema, "Base schema")->required()->check(CLI::ExistingFile);
    extend->add_option("--edits", ext_edits, "Edit file")->required()->check(CLI::ExistingFile);
    extend->add_option("-o,--output", ext_out, "Output path (stdout when omitted)");

    std::vector<std::string> chat_schemas;
    bool chat_verbose = false;
    auto* chat = app.add_subcommand("chat", "Terminal chat over one session");
    add_common(chat, common);
    chat->add_option("--schema", chat_schemas, "Bind only these schema ids");
    chat->add_flag("-v,--verbose", chat_verbose, "Show belief, DB count, action and delex response");

    std::string host, port_file, log_path;
    int port = -1;
    bool restore = false;
    auto* serve = app.add_subcommand("serve", "Run the HTTP API");
    add_common(serve, common);
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Port (0 picks a free port)");
    serve->add_option("--port-file", port_file, "Write the bound port here");
    serve->add_option("--log", log_path, "Append-only session log (JSON lines)");
    serve->add_flag("--restore", restore, "Rebuild sessions from the log at startup");

    std::string corpus, report, transcript;
    std::size_t workers = 4;
    bool teacher = false, as_json = false;
    double min_combined = 0.0, min_f1 = 0.0;
    auto* e2e = app.add_subcommand("eval-e2e", "End-to-end Inform/Success/BLEU/Combined");
    add_common(e2e, common);
    e2e->add_option("--corpus", corpus, "Corpus (JSON lines)")->required()->check(CLI::ExistingFile);
    e2e->add_option("--workers", workers, "Dialogs evaluated concurrently")->capture_default_str();
    e2e->add_flag("--teacher-forcing", teacher, "Use gold beliefs instead of DST output");
    e2e->add_flag("--lexicalized-history", common.lexicalized_history, "Show final replies, not delex text, in prompts");
    e2e->add_option("--report", report, "Write the JSON report here");
    e2e->add_option("--transcript", transcript, "Write the JSON-lines transcript here");
    e2e->add_option("--min-combined", min_combined, "Exit 1 below this Combined score");
    e2e->add_flag("--json", as_json, "Print the JSON report instead of the table");

    auto* act = app.add_subcommand("eval-action", "Next-action weighted F1 and accuracy");
    add_common(act, common);
    act->add_option("--corpus", corpus, "Corpus (JSON lines)")->required()->check(CLI::ExistingFile);
    act->add_option("--workers", workers, "Dialogs evaluated concurrently")->capture_default_str();
    act->add_flag("--teacher-forcing", teacher, "Use gold beliefs instead of DST output");
    act->add_flag("--lexicalized-history", common.lexicalized_history, "Show final replies, not delex text, in prompts");
    act->add_option("--report", report, "Write the JSON report here");
    act->add_option("--min-f1", min_f1, "Exit 1 below this weighted F1");

    std::string oracle_out;
    auto* oracle = app.add_subcommand("oracle-script", "Write a replay script of a corpus's gold outputs");
    add_common(oracle, common);
    oracle->add_option("--corpus", corpus, "Corpus (JSON lines)")->required()->check(CLI::ExistingFile);
    oracle->add_option("-o,--output", oracle_out, "Output path (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*validate) return cmd_validate(schema_files);
        if (*extend) return cmd_extend(ext_schema, ext_edits, ext_out);
        if (*chat) return cmd_chat(common, chat_schemas, chat_verbose);
        if (*serve) return cmd_serve(common, host, port, port_file, log_path, restore);
        if (*e2e) return cmd_eval_e2e(common, corpus, workers, teacher, report, transcript, min_combined, as_json);
        if (*act) return cmd_eval_action(common, corpus, workers, teacher, report, min_f1);
        if (*oracle) return cmd_oracle(common, corpus, oracle_out);
    } catch (const ConfigError& e) {
        std::cerr << "config_error: " << e.what() << "\n";
        return kUsage;
    } catch (const ValidationError& e) {
        for (const auto& d : e.diagnostics()) std::cerr << to_string(d) << "\n";
        return kFailed;
    } catch (const Error& e) {
        std::cerr << e.code() << ": " << e.what() << "\n";
        return kFailed;
    }
    return kUsage;
}
