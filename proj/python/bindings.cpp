// JSON crosses the boundary as text; the Python package wraps it in dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "seqacq/eval/metrics.hpp"
#include "seqacq/interface/config.hpp"
#include "seqacq/interface/pipeline.hpp"
#include "seqacq/interface/service.hpp"
#include "seqacq/interface/session.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace seqacq;

namespace {

using Command = json (*)(const json&);

std::string call(Command command, const std::string& config) {
  json result;
  {
    py::gil_scoped_release release;
    result = command(json::parse(config));
  }
  return result.dump();
}

class Sessions {
 public:
  explicit Sessions(const std::string& config)
      : manager_(interface::make_session_manager(json::parse(config))) {}

  std::string create(const std::string& request) {
    return manager_->create_session(json::parse(request)).dump();
  }
  std::string suggest(const std::string& id, std::size_t k) {
    return manager_->get_suggestion(id, k).dump();
  }
  std::string observe(const std::string& id, const std::string& request) {
    return manager_->observe(id, json::parse(request)).dump();
  }
  std::string finalize(const std::string& id) { return manager_->finalize(id).dump(); }
  std::string export_log(const std::string& id) const { return manager_->export_log(id).dump(); }
  std::string schema() const { return manager_->schema_json().dump(); }
  std::size_t count() const { return manager_->session_count(); }

 private:
  std::shared_ptr<interface::SessionManager> manager_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  auto base = py::register_exception<Error>(m, "SeqacqError", PyExc_RuntimeError);
  static py::exception<interface::ServiceError> service_error(m, "ServiceError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const interface::ServiceError& e) {
      service_error(e.to_json().dump().c_str());
    }
  });

  m.def("default_config", [] { return interface::default_config().dump(); });
  m.def("load_config", [](const std::string& path) { return interface::load_config(path).dump(); });
  m.def("with_overrides", [](const std::string& config, const std::vector<std::string>& sets) {
    return interface::with_overrides(json::parse(config), sets).dump();
  });

  m.def("gen_data", [](const std::string& c) { return call(interface::run_gen_data, c); });
  m.def("train_guesser", [](const std::string& c) { return call(interface::run_train_guesser, c); });
  m.def("train_agent", [](const std::string& c) { return call(interface::run_train_agent, c); });
  m.def("evaluate", [](const std::string& c) { return call(interface::run_evaluate, c); });
  m.def("sweep_budget", [](const std::string& c) { return call(interface::run_sweep_budget, c); });
  m.def("oracle", [](const std::string& c) { return call(interface::run_oracle, c); });

  m.def("auroc", [](const std::vector<double>& s, const std::vector<int>& y) {
    return eval::auroc(s, y);
  });
  m.def("auprc", [](const std::vector<double>& s, const std::vector<int>& y) {
    return eval::auprc(s, y);
  });
  m.def("iou", &eval::iou);

  py::class_<Sessions>(m, "Sessions")
      .def(py::init<const std::string&>())
      .def("create", &Sessions::create)
      .def("suggest", &Sessions::suggest)
      .def("observe", &Sessions::observe)
      .def("finalize", &Sessions::finalize)
      .def("export_log", &Sessions::export_log)
      .def("schema", &Sessions::schema)
      .def("__len__", &Sessions::count);
}
