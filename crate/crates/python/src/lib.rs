//! Python module `thpsat`.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use thpsat::alloc::{self, AllocConfig, HugeAlloc, MadviseAdvisor};
use thpsat::chase::{run_chase_live, ChaseAllocator};
use thpsat::cnf;
use thpsat::harness::{emit_report, ReportFormat};
use thpsat::metrics;
use thpsat::solver::{Budget, SolveResult, Solver, SolverConfig};
use thpsat::tlb::{self, AccessTrace, TlbModel};

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// CNF formula over variables `1..=num_vars`.
#[pyclass(name = "Formula", module = "thpsat", from_py_object)]
#[derive(Clone)]
struct PyFormula {
    inner: cnf::Formula,
}

#[pymethods]
impl PyFormula {
    #[new]
    fn new(num_vars: usize) -> Self {
        PyFormula { inner: cnf::Formula::new(num_vars) }
    }

    #[getter]
    fn num_vars(&self) -> usize {
        self.inner.num_vars()
    }

    #[getter]
    fn num_clauses(&self) -> usize {
        self.inner.num_clauses()
    }

    /// Adds a clause of non-zero DIMACS literals. Returns False for a
    /// dropped tautology.
    fn add_clause(&mut self, lits: Vec<i32>) -> PyResult<bool> {
        for &l in &lits {
            if l == 0 || l.unsigned_abs() as usize > self.inner.num_vars() {
                return Err(value_err(format!("literal {l} out of range")));
            }
        }
        Ok(self.inner.add_dimacs(&lits).is_some())
    }

    fn clauses(&self) -> Vec<Vec<i32>> {
        self.inner
            .clauses()
            .map(|c| c.iter().map(|l| l.to_dimacs()).collect())
            .collect()
    }

    fn to_dimacs(&self) -> String {
        cnf::write_dimacs(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!("Formula(num_vars={}, num_clauses={})", self.inner.num_vars(), self.inner.num_clauses())
    }
}

#[pyfunction]
fn parse_dimacs(text: &str) -> PyResult<PyFormula> {
    cnf::parse_dimacs(text.as_bytes())
        .map(|inner| PyFormula { inner })
        .map_err(value_err)
}

fn json_to_py<'py>(py: Python<'py>, map: &serde_json::Map<String, serde_json::Value>) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    for (k, v) in map {
        match v {
            serde_json::Value::Number(n) if n.is_u64() => d.set_item(k, n.as_u64())?,
            serde_json::Value::Number(n) => d.set_item(k, n.as_f64())?,
            serde_json::Value::Bool(b) => d.set_item(k, *b)?,
            serde_json::Value::String(s) => d.set_item(k, s)?,
            _ => d.set_item(k, py.None())?,
        }
    }
    Ok(d)
}

/// Solves `formula`. `thp` selects the allocator policy; `None` reads it
/// from the environment. Returns a dict with `status`, `exit_code`,
/// `model` (DIMACS literals or None) and `stats`.
#[pyfunction]
#[pyo3(signature = (formula, timeout=None, conflicts=None, thp=None, use_blockers=true, check_invariants=false))]
fn solve<'py>(
    py: Python<'py>,
    formula: &PyFormula,
    timeout: Option<f64>,
    conflicts: Option<u64>,
    thp: Option<bool>,
    use_blockers: bool,
    check_invariants: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let alloc = match thp {
        None => HugeAlloc::from_env(),
        Some(true) => HugeAlloc::new(AllocConfig::enabled(), Arc::new(MadviseAdvisor)),
        Some(false) => HugeAlloc::baseline(),
    };
    let alloc = Arc::new(alloc);
    let config = SolverConfig {
        use_blockers,
        check_invariants,
        ..Default::default()
    };
    let f = formula.inner.clone();
    let (result, stats, advised) = py.detach(move || {
        let mut s = Solver::from_formula(&f, config, alloc.clone());
        let r = s.solve(Budget {
            timeout: timeout.map(Duration::from_secs_f64),
            conflicts,
        });
        (r, s.stats().to_json(), alloc.snapshot().advised_bytes)
    });
    let out = PyDict::new(py);
    let status = match &result {
        SolveResult::Sat(_) => "sat",
        SolveResult::Unsat => "unsat",
        SolveResult::Unknown(_) => "unknown",
    };
    out.set_item("status", status)?;
    out.set_item("exit_code", result.exit_code())?;
    match &result {
        SolveResult::Sat(m) => {
            let lits: Vec<i64> = m
                .iter()
                .enumerate()
                .map(|(i, &b)| if b { i as i64 + 1 } else { -(i as i64 + 1) })
                .collect();
            out.set_item("model", PyList::new(py, lits)?)?
        }
        _ => out.set_item("model", py.None())?,
    }
    let stats = json_to_py(py, &stats)?;
    stats.set_item("alloc_advised_bytes", advised)?;
    out.set_item("stats", stats)?;
    Ok(out)
}

#[pyfunction]
fn pages_touched(addresses: Vec<u64>, page_size: u64) -> PyResult<u64> {
    tlb::pages_touched(&AccessTrace::new(addresses), page_size).map_err(value_err)
}

/// LRU TLB replay; returns `(distinct_pages, hits, misses)`.
#[pyfunction]
fn simulate(addresses: Vec<u64>, entries: usize, page_size: u64) -> PyResult<(u64, u64, u64)> {
    let model = TlbModel::new(entries, page_size).map_err(value_err)?;
    let r = tlb::simulate(&AccessTrace::new(addresses), &model);
    Ok((r.distinct_pages, r.hits, r.misses))
}

#[pyfunction]
fn gen_chase_trace(footprint: u64, steps: usize, seed: u64) -> PyResult<Vec<u64>> {
    if footprint == 0 {
        return Err(value_err("footprint must be positive"));
    }
    Ok(tlb::gen_chase_trace(footprint, steps, seed).addresses)
}

#[pyfunction]
fn coverage_example_trace() -> Vec<u64> {
    tlb::coverage_example_trace().addresses
}

#[pyfunction]
fn saved_runtime_pct(t_n: f64, t_thp: f64) -> PyResult<f64> {
    metrics::saved_runtime_pct(t_n, t_thp).map_err(value_err)
}

#[pyfunction]
fn tlb_miss_ratio_pct(tlb_n: f64, tlb_thp: f64) -> PyResult<f64> {
    metrics::tlb_miss_ratio_pct(tlb_n, tlb_thp).map_err(value_err)
}

/// Allocation policy derived from an environment mapping.
#[pyfunction]
fn load_alloc_config(py: Python<'_>, env: HashMap<String, String>) -> PyResult<Bound<'_, PyDict>> {
    let c = alloc::load_config(&env);
    let d = PyDict::new(py);
    d.set_item("enabled", c.is_enabled())?;
    d.set_item("huge_page_size", c.huge_page_size())?;
    d.set_item("threshold", c.threshold())?;
    Ok(d)
}

/// `(length, alignment)` the allocator uses for a request of `size` bytes.
#[pyfunction]
#[pyo3(signature = (size, enabled=true, huge_page_size=alloc::DEFAULT_HUGE_PAGE_SIZE, threshold=alloc::DEFAULT_THRESHOLD))]
fn align_request(size: usize, enabled: bool, huge_page_size: usize, threshold: usize) -> PyResult<(usize, usize)> {
    let c = AllocConfig::new(enabled, huge_page_size, threshold).map_err(value_err)?;
    alloc::align_request(size, &c).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (footprint, steps, seed=1, thp=true))]
fn chase<'py>(py: Python<'py>, footprint: usize, steps: u64, seed: u64, thp: bool) -> PyResult<Bound<'py, PyDict>> {
    let which = if thp { ChaseAllocator::HugePage } else { ChaseAllocator::Baseline };
    let r = py
        .detach(|| run_chase_live(footprint, steps, seed, which))
        .map_err(|e| PyOSError::new_err(e.to_string()))?;
    let d = PyDict::new(py);
    d.set_item("footprint", r.footprint)?;
    d.set_item("steps", r.steps)?;
    d.set_item("wall_s", r.wall.as_secs_f64())?;
    d.set_item("dtlb_load_misses", r.dtlb_load_misses)?;
    d.set_item("anon_huge_bytes", r.anon_huge_bytes)?;
    d.set_item("advised_bytes", r.advised_bytes)?;
    Ok(d)
}

/// Report for a suite output directory, as markdown or CSV text.
#[pyfunction]
#[pyo3(signature = (dir, format="md"))]
fn report(dir: PathBuf, format: &str) -> PyResult<String> {
    let f: ReportFormat = format.parse().map_err(value_err)?;
    emit_report(&dir, f).map_err(|e| PyOSError::new_err(e.to_string()))
}

#[pymodule(name = "thpsat")]
fn thpsat_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFormula>()?;
    m.add_function(wrap_pyfunction!(parse_dimacs, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(pages_touched, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(gen_chase_trace, m)?)?;
    m.add_function(wrap_pyfunction!(coverage_example_trace, m)?)?;
    m.add_function(wrap_pyfunction!(saved_runtime_pct, m)?)?;
    m.add_function(wrap_pyfunction!(tlb_miss_ratio_pct, m)?)?;
    m.add_function(wrap_pyfunction!(load_alloc_config, m)?)?;
    m.add_function(wrap_pyfunction!(align_request, m)?)?;
    m.add_function(wrap_pyfunction!(chase, m)?)?;
    m.add_function(wrap_pyfunction!(report, m)?)?;
    Ok(())
}
