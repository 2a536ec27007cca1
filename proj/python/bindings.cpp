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

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "schemabot/belief.hpp"
#include "schemabot/config.hpp"
#include "schemabot/dbkit.hpp"
#include "schemabot/eval.hpp"
#include "schemabot/llm.hpp"
#include "schemabot/pipeline.hpp"
#include "schemabot/schema.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace schemabot;

namespace {

PyObject* g_error = nullptr;

py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::handle& obj) {
    return json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

py::dict diagnostic_dict(const Diagnostic& d) {
    py::dict out;
    out["severity"] = d.is_error() ? "error" : "warning";
    out["element"] = d.element;
    out["message"] = d.message;
    return out;
}

BeliefState belief_from_py(const py::dict& d) {
    BeliefState b;
    b.domain = d["domain"].cast<std::string>();
    if (d.contains("pairs")) b.pairs = d["pairs"].cast<std::vector<std::pair<std::string, std::string>>>();
    return b;
}

py::dict belief_to_py(const BeliefState& b) {
    py::dict out;
    out["domain"] = b.domain;
    out["pairs"] = b.pairs;
    return out;
}

class PyEngine {
  public:
    PyEngine(const std::string& config_path, const py::dict& overrides) {
        EngineConfig cfg = load_engine_config(config_path);
        if (!overrides.empty()) cfg.engine->config = pipeline_config_from_json(from_py(overrides), cfg.engine->config);
        engine_ = cfg.engine;
        backend_ = cfg.backend;
        base_dir_ = cfg.base_dir;
    }

    std::vector<std::string> schema_ids() const {
        std::vector<std::string> ids;
        for (const auto& s : engine_->schemas) ids.push_back(s.domain);
        return ids;
    }

    py::object pipeline_config() const { return to_py(to_json(engine_->config)); }

    py::dict parse_belief(const std::string& completion) const {
        return belief_to_py(parse_belief_sql(completion, engine_->schemas, engine_->canon));
    }

    py::list query(const py::dict& belief) const {
        const BeliefState b = belief_from_py(belief);
        const DbTable* table = engine_->db(b.domain);
        if (!table) throw UnknownDomain("no database for domain '" + b.domain + "'");
        py::list out;
        for (const auto& e : schemabot::query(*table, b, engine_->canon).entries) out.append(e.attributes);
        return out;
    }

    BackendProvider provider(const std::string& backend) const {
        return backend.empty() ? make_backend_provider(backend_, base_dir_) : make_backend_provider(json(backend), ".");
    }

    std::shared_ptr<const Engine> engine() const { return engine_; }

    py::object evaluate(const std::string& corpus_path, const std::string& backend, std::size_t workers,
                        bool teacher_forcing) const {
        const auto corpus = load_corpus(corpus_path);
        EvalConfig ec;
        auto p = provider(backend);
        ec.backend_factory = [p](const EvalDialog& d) { return p(d.id); };
        ec.workers = workers;
        ec.teacher_forcing = teacher_forcing;
        EvalReport rep;
        {
            py::gil_scoped_release release;
            rep = run_e2e_eval(corpus, engine_, ec);
        }
        return to_py(to_json(rep));
    }

    std::vector<std::string> oracle_script(const std::string& corpus_path, const std::string& dialog_id) const {
        for (const auto& d : load_corpus(corpus_path)) {
            if (d.id == dialog_id) return oracle_completions(d, engine_->config);
        }
        throw InvalidArgument("no dialog '" + dialog_id + "' in " + corpus_path);
    }

  private:
    std::shared_ptr<const Engine> engine_;
    json backend_;
    std::string base_dir_;
};

class PySession {
  public:
    PySession(const PyEngine& engine, const std::string& backend, const std::vector<std::string>& schema_ids) {
        const std::string id = new_session_id();
        session_ = open_session(engine.engine(), engine.provider(backend)(id), schema_ids, id);
    }

    py::object step(const std::string& text) {
        json j;
        {
            py::gil_scoped_release release;
            j = to_json(schemabot::step(session_, text), false);
        }
        return to_py(j);
    }

    std::string id() const { return session_.id; }
    std::vector<std::string> schema_ids() const {
        std::vector<std::string> ids;
        for (const auto& s : session_.schemas) ids.push_back(s.domain);
        return ids;
    }
    std::string history() const { return session_.history.render(); }
    std::size_t turns() const { return session_.records.size(); }

  private:
    DialogSession session_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Schema-guided task-oriented dialog engine";

    g_error = PyErr_NewException("schemabot.SchemabotError", PyExc_RuntimeError, nullptr);
    m.attr("SchemabotError") = py::reinterpret_borrow<py::object>(g_error);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object err = py::reinterpret_borrow<py::object>(g_error)(e.what());
            err.attr("code") = e.code();
            py::list diags;
            if (const auto* v = dynamic_cast<const ValidationError*>(&e)) {
                for (const auto& d : v->diagnostics()) diags.append(diagnostic_dict(d));
            }
            err.attr("diagnostics") = diags;
            PyErr_SetObject(g_error, err.ptr());
        }
    });

    m.def(
        "parse_schema", [](const std::string& text) { return to_py(json::parse(serialize_schema(parse_schema(text)))); },
        py::arg("text"), "Parse and validate a schema; returns its canonical form.");
    m.def(
        "validate_schema",
        [](const std::string& text) {
            py::list out;
            for (const auto& d : validate_schema(parse_schema(text))) out.append(diagnostic_dict(d));
            return out;
        },
        py::arg("text"), "Warnings for a schema that parses; errors raise SchemabotError.");
    m.def(
        "extend_schema",
        [](const std::string& schema_text, const std::string& edits_text) {
            return serialize_schema(edit_skeleton(parse_schema(schema_text), parse_edits(edits_text)));
        },
        py::arg("schema"), py::arg("edits"), "Apply a skeleton edit file; returns canonical JSON text.");

    m.def(
        "render_belief_sql", [](const py::dict& b) { return render_belief_sql(belief_from_py(b)); }, py::arg("belief"));
    m.def(
        "parse_belief_sql", [](const std::string& s) { return belief_to_py(parse_belief_sql_unchecked(s)); },
        py::arg("completion"), "Parse without checking domains or slots against a schema.");

    m.def(
        "corpus_bleu",
        [](const std::vector<std::string>& hyps, const std::vector<std::string>& refs) { return corpus_bleu(hyps, refs); },
        py::arg("hypotheses"), py::arg("references"));
    m.def("combined", &combined, py::arg("inform"), py::arg("success"), py::arg("bleu"));
    m.def(
        "next_action_scores",
        [](const std::vector<std::vector<std::string>>& gold, const std::vector<std::vector<std::string>>& pred) {
            const ActionScores s = next_action_scores(gold, pred);
            py::dict out;
            out["weighted_f1"] = s.weighted_f1;
            out["accuracy"] = s.accuracy;
            return out;
        },
        py::arg("gold"), py::arg("predicted"));
    m.def("prompt_hash", [](const std::string& p) { return prompt_hash(p); }, py::arg("prompt"));

    py::class_<PyEngine>(m, "Engine")
        .def(py::init<const std::string&, const py::dict&>(), py::arg("config"), py::arg("pipeline") = py::dict())
        .def_property_readonly("schema_ids", &PyEngine::schema_ids)
        .def_property_readonly("pipeline", &PyEngine::pipeline_config)
        .def("parse_belief", &PyEngine::parse_belief, py::arg("completion"))
        .def("query", &PyEngine::query, py::arg("belief"))
        .def("evaluate", &PyEngine::evaluate, py::arg("corpus"), py::arg("backend") = "", py::arg("workers") = 4,
             py::arg("teacher_forcing") = false)
        .def("oracle_script", &PyEngine::oracle_script, py::arg("corpus"), py::arg("dialog_id"));

    py::class_<PySession>(m, "Session")
        .def(py::init<const PyEngine&, const std::string&, const std::vector<std::string>&>(), py::arg("engine"),
             py::arg("backend") = "", py::arg("schema_ids") = std::vector<std::string>{}, py::keep_alive<1, 2>())
        .def("step", &PySession::step, py::arg("text"))
        .def_property_readonly("id", &PySession::id)
        .def_property_readonly("schema_ids", &PySession::schema_ids)
        .def_property_readonly("history", &PySession::history)
        .def_property_readonly("turns", &PySession::turns);
}
