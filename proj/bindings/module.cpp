#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mflab/experiments.hpp"
#include "mflab/norms.hpp"

namespace py = pybind11;
using namespace mflab;

namespace {

ParamState state_from_tables(const std::vector<int>& widths, int w1_dim,
                             const std::vector<double>& w1,
                             const std::vector<std::vector<double>>& w,
                             const std::vector<std::vector<double>>& b) {
    ParamState s = make_state(widths, w1_dim);
    if (w1.size() != s.w1.size() || w.size() != s.w.size() || b.size() != s.b.size())
        throw std::invalid_argument("table sizes do not match the widths");
    s.w1 = w1;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i].size() != s.w[i].size())
            throw std::invalid_argument("weight table size mismatch");
        s.w[i] = w[i];
    }
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (b[i].size() != s.b[i].size())
            throw std::invalid_argument("bias table size mismatch");
        s.b[i] = b[i];
    }
    return s;
}

} // namespace

PYBIND11_MODULE(_mflab, m) {
    m.doc() = "mean-field network dynamics lab: finite SGD networks, particle ODEs, "
              "coupling diagnostics and the reduced i.i.d. dynamics";
    m.attr("__version__") = kVersion;

    py::class_<Activation>(m, "Activation")
        .def_static("parse", &Activation::parse)
        .def("value", &Activation::value)
        .def("deriv", &Activation::deriv)
        .def("name", &Activation::name);

    py::class_<ArchitectureSpec>(m, "ArchitectureSpec")
        .def_readonly("L", &ArchitectureSpec::L)
        .def_readonly("x_dim", &ArchitectureSpec::x_dim)
        .def_readonly("w1_dim", &ArchitectureSpec::w1_dim)
        .def_readonly("input_bias", &ArchitectureSpec::input_bias)
        .def_readonly("growth_p", &ArchitectureSpec::growth_p)
        .def("phi1", &ArchitectureSpec::phi1)
        .def("phi", &ArchitectureSpec::phi)
        .def("phi_out", &ArchitectureSpec::phi_out)
        .def("sigma_LH", &ArchitectureSpec::sigma_LH)
        .def("sigma_w", &ArchitectureSpec::sigma_w)
        .def("sigma_b", &ArchitectureSpec::sigma_b)
        .def("sigma_Hprev", &ArchitectureSpec::sigma_Hprev)
        .def("sigma_w1", &ArchitectureSpec::sigma_w1);

    py::class_<FcConfig>(m, "FcConfig")
        .def(py::init<>())
        .def_readwrite("d", &FcConfig::d)
        .def_readwrite("widths", &FcConfig::widths)
        .def_readwrite("activations", &FcConfig::activations)
        .def_readwrite("loss", &FcConfig::loss)
        .def_readwrite("w_regs", &FcConfig::w_regs)
        .def_readwrite("b_regs", &FcConfig::b_regs);

    m.def("make_fc_architecture", &make_fc_architecture);

    py::class_<AuditItem>(m, "AuditItem")
        .def_readonly("name", &AuditItem::name)
        .def_readonly("estimated_K", &AuditItem::estimated_K)
        .def_readonly("passed", &AuditItem::pass)
        .def_readonly("note", &AuditItem::note);
    py::class_<AuditReport>(m, "AuditReport")
        .def_readonly("items", &AuditReport::items)
        .def_readonly("all_pass", &AuditReport::all_pass)
        .def_readonly("kink_flag", &AuditReport::kink_flag);
    m.def("audit_assumptions", &audit_assumptions, py::arg("spec"),
          py::arg("sample_count"), py::arg("radius"), py::arg("rng_seed"));

    py::class_<ParamState>(m, "ParamState")
        .def_readonly("widths", &ParamState::widths)
        .def_readonly("w1_dim", &ParamState::w1_dim)
        .def_readonly("w1", &ParamState::w1)
        .def_readonly("w", &ParamState::w)
        .def_readonly("b", &ParamState::b)
        .def_readonly("time", &ParamState::time)
        .def("max_abs", &ParamState::max_abs)
        .def("param_count", &ParamState::param_count);
    m.def("make_state", &state_from_tables, py::arg("widths"), py::arg("w1_dim"),
          py::arg("w1"), py::arg("w"), py::arg("b"));

    py::class_<Dataset>(m, "Dataset")
        .def(py::init<>())
        .def_readwrite("xs", &Dataset::xs)
        .def_readwrite("ys", &Dataset::ys);

    py::class_<ForwardCache>(m, "ForwardCache")
        .def_readonly("H", &ForwardCache::H)
        .def_readonly("yhat", &ForwardCache::yhat);
    m.def("forward",
          py::overload_cast<const ParamState&, const ArchitectureSpec&, const Vec&>(
              &forward));

    py::class_<BackwardBundle>(m, "BackwardBundle")
        .def_readonly("delta_H", &BackwardBundle::delta_H)
        .def_readonly("delta_w1", &BackwardBundle::delta_w1)
        .def_readonly("delta_w", &BackwardBundle::delta_w)
        .def_readonly("delta_b", &BackwardBundle::delta_b);
    m.def("backward",
          [](const ParamState& s, const ArchitectureSpec& spec, const Vec& x, double y) {
              ForwardCache c = forward(s, spec, x);
              return backward(s, spec, x, y, c);
          });
    m.def("grad_check", &grad_check, py::arg("state"), py::arg("spec"), py::arg("x"),
          py::arg("y"), py::arg("step"), py::arg("max_params") = 512,
          py::arg("rng_seed") = 17);
    m.def("sample_loss", &sample_loss);
    m.def("population_loss", &population_loss);

    py::class_<SnapshotDiag>(m, "SnapshotDiag")
        .def_readonly("norm_W", &SnapshotDiag::norm_W)
        .def_readonly("loss", &SnapshotDiag::loss)
        .def_readonly("max_update", &SnapshotDiag::max_update);
    py::class_<TrajectoryLog>(m, "TrajectoryLog")
        .def_readonly("times", &TrajectoryLog::times)
        .def_readonly("states", &TrajectoryLog::states)
        .def_readonly("diags", &TrajectoryLog::diags)
        .def("at_time", &TrajectoryLog::at_time, py::arg("t"), py::arg("tol") = 1e-9);

    py::class_<SgdConfig>(m, "SgdConfig")
        .def(py::init<>())
        .def_readwrite("epsilon", &SgdConfig::epsilon)
        .def_readwrite("horizon_T", &SgdConfig::horizon_T)
        .def_readwrite("record_stride", &SgdConfig::record_stride)
        .def_readwrite("data_seed", &SgdConfig::data_seed);
    m.def("sgd_step", &sgd_step);
    m.def("train_sgd", &train_sgd);

    py::class_<TimeGrid> grid(m, "TimeGrid");
    py::enum_<TimeGrid::Scheme>(grid, "Scheme")
        .value("euler", TimeGrid::Scheme::Euler)
        .value("rk4", TimeGrid::Scheme::Rk4);
    grid.def(py::init<>())
        .def_readwrite("t_end", &TimeGrid::t_end)
        .def_readwrite("dt", &TimeGrid::dt)
        .def_readwrite("scheme", &TimeGrid::scheme)
        .def_readwrite("snapshot_stride", &TimeGrid::snapshot_stride);

    m.def("particle_rhs", &particle_rhs);
    m.def("integrate_particle", &integrate_particle);
    m.def("picard_map", &picard_map);
    py::class_<PicardReport>(m, "PicardReport")
        .def_readonly("residuals", &PicardReport::residuals)
        .def_readonly("iterations_used", &PicardReport::iterations_used)
        .def_readonly("converged", &PicardReport::converged);
    m.def("picard_solve", &picard_solve);

    py::class_<LawSpec>(m, "LawSpec")
        .def_static("gaussian", &LawSpec::gaussian)
        .def_static("uniform", &LawSpec::uniform)
        .def_static("point", &LawSpec::point)
        .def_static("epigraph", &LawSpec::epigraph)
        .def_static("discrete", &LawSpec::discrete, py::arg("atoms"),
                    py::arg("probs") = std::vector<double>{})
        .def("name", &LawSpec::name);
    py::class_<InitLawSpec>(m, "InitLawSpec")
        .def(py::init<>())
        .def_readwrite("w_laws", &InitLawSpec::w_laws)
        .def_readwrite("b_laws", &InitLawSpec::b_laws)
        .def_readwrite("enforce_bounded", &InitLawSpec::enforce_bounded);
    py::class_<EmbeddingTable>(m, "EmbeddingTable")
        .def_readonly("master_seed", &EmbeddingTable::master_seed)
        .def_readonly("resolution", &EmbeddingTable::resolution)
        .def_readonly("tables", &EmbeddingTable::tables);
    m.def("sample_embedding", &sample_embedding, py::arg("laws"), py::arg("resolution"),
          py::arg("w1_dim"), py::arg("master_seed"));
    py::class_<CoupledPair>(m, "CoupledPair")
        .def_readonly("nn_init", &CoupledPair::nn_init)
        .def_readonly("mf_init", &CoupledPair::mf_init);
    m.def("couple", &couple);
    m.def("dump_embedding", &dump_embedding);
    m.def("traj_distance", &traj_distance);
    m.def("trajectory_norm", &trajectory_norm, py::arg("log"), py::arg("t"), py::arg("p"));
    m.def("test_function_gap", &test_function_gap);
    m.def("output_function_gap", &output_function_gap);

    py::class_<QuadratureMeasure>(m, "QuadratureMeasure")
        .def_static("equal_weight", &QuadratureMeasure::equal_weight)
        .def_static("scalar_atoms", &QuadratureMeasure::scalar_atoms, py::arg("values"),
                    py::arg("weights") = std::vector<double>{})
        .def_readonly("atoms", &QuadratureMeasure::atoms)
        .def_readonly("weights", &QuadratureMeasure::weights);
    py::class_<ReducedState>(m, "ReducedState")
        .def_readonly("w1_star", &ReducedState::w1_star)
        .def_readonly("w2_star", &ReducedState::w2_star)
        .def_readonly("wi_star", &ReducedState::wi_star)
        .def_readonly("wLm1_star", &ReducedState::wLm1_star)
        .def_readonly("wL_star", &ReducedState::wL_star)
        .def_readonly("b_star", &ReducedState::b_star)
        .def_readonly("bLm1_star", &ReducedState::bLm1_star)
        .def_readonly("time", &ReducedState::time);
    py::class_<ReducedTrajectory>(m, "ReducedTrajectory")
        .def_readonly("times", &ReducedTrajectory::times)
        .def_readonly("states", &ReducedTrajectory::states);
    m.def("integrate_reduced", &integrate_reduced);
    py::class_<AtomizedSystem>(m, "AtomizedSystem")
        .def_readonly("init", &AtomizedSystem::init)
        .def_readonly("w1_atoms", &AtomizedSystem::w1_atoms)
        .def_readonly("w_atoms", &AtomizedSystem::w_atoms);
    m.def("sample_atomized_system", &sample_atomized_system);
    m.def("reduced_vs_particle_gap", &reduced_vs_particle_gap);
    py::class_<TranslationProfile>(m, "TranslationProfile")
        .def_readonly("mean_displacement", &TranslationProfile::mean_displacement)
        .def_readonly("spread", &TranslationProfile::spread);
    m.def("translation_profile", &translation_profile);

    py::class_<ConvergenceConfig> ccfg(m, "ConvergenceConfig");
    py::enum_<ConvergenceConfig::Which>(ccfg, "Which")
        .value("two_layer", ConvergenceConfig::Which::TwoLayer)
        .value("three_layer", ConvergenceConfig::Which::ThreeLayer);
    ccfg.def(py::init<>())
        .def_readwrite("which", &ConvergenceConfig::which)
        .def_readwrite("d1", &ConvergenceConfig::d1)
        .def_readwrite("widths", &ConvergenceConfig::widths)
        .def_readwrite("act1", &ConvergenceConfig::act1)
        .def_readwrite("act2", &ConvergenceConfig::act2)
        .def_readwrite("act3", &ConvergenceConfig::act3)
        .def_readwrite("loss", &ConvergenceConfig::loss)
        .def_readwrite("teacher_width", &ConvergenceConfig::teacher_width)
        .def_readwrite("dataset_size", &ConvergenceConfig::dataset_size)
        .def_readwrite("T", &ConvergenceConfig::T)
        .def_readwrite("freeze_w3", &ConvergenceConfig::freeze_w3)
        .def_readwrite("w1_law", &ConvergenceConfig::w1_law)
        .def_readwrite("w2_law", &ConvergenceConfig::w2_law)
        .def_readwrite("w3_law", &ConvergenceConfig::w3_law);
    py::class_<ConvergenceSystem>(m, "ConvergenceSystem")
        .def_readonly("init", &ConvergenceSystem::init)
        .def_readonly("spec", &ConvergenceSystem::spec)
        .def_readonly("data", &ConvergenceSystem::data)
        .def_readonly("teacher", &ConvergenceSystem::teacher)
        .def_readonly("baseline_loss", &ConvergenceSystem::baseline_loss);
    m.def("build_convergence_system", &build_convergence_system);
    py::class_<ConvergenceReport>(m, "ConvergenceReport")
        .def_readonly("times", &ConvergenceReport::times)
        .def_readonly("loss_curve", &ConvergenceReport::loss_curve)
        .def_readonly("final_loss", &ConvergenceReport::final_loss)
        .def_readonly("baseline_loss", &ConvergenceReport::baseline_loss)
        .def_readonly("drift", &ConvergenceReport::drift)
        .def_readonly("support_coverage", &ConvergenceReport::support_coverage)
        .def_readonly("loss_monotone", &ConvergenceReport::loss_monotone)
        .def_readonly("max_loss_increase", &ConvergenceReport::max_loss_increase);
    m.def("convergence_diagnostics", &convergence_diagnostics, py::arg("log"),
          py::arg("spec"), py::arg("data"), py::arg("baseline"),
          py::arg("monotone_tol") = 1e-8, py::arg("dt") = 0.0);
    m.def("support_probe", &support_probe);
    m.def("gaussian_bump", &gaussian_bump);
    py::class_<PairTestFunction>(m, "PairTestFunction");
    m.def("weak_pde_residual", &weak_pde_residual);

    py::class_<SlopeFit>(m, "SlopeFit")
        .def_readonly("slope", &SlopeFit::slope)
        .def_readonly("stderr", &SlopeFit::stderr_);
    m.def("fit_loglog_slope", &fit_loglog_slope);
    py::class_<MetricRow>(m, "MetricRow")
        .def_readonly("experiment", &MetricRow::experiment)
        .def_readonly("seed", &MetricRow::seed)
        .def_readonly("knob", &MetricRow::knob)
        .def_readonly("knob_value", &MetricRow::knob_value)
        .def_readonly("metric", &MetricRow::metric)
        .def_readonly("value", &MetricRow::value);
    py::class_<MetricReport>(m, "MetricReport")
        .def_readonly("rows", &MetricReport::rows);
    m.def("run_experiment", &run_experiment, py::arg("config_json"), py::arg("out_dir"),
          py::arg("seed_offset") = 0, py::arg("threads") = 1);
}
