use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module(code: &str) {
    Python::attach(|py| {
        let m = pyo3::wrap_pymodule!(pyhdrsample::pyhdrsample)(py);
        let locals = PyDict::new(py);
        locals.set_item("hs", m).unwrap();
        let code = std::ffi::CString::new(code).unwrap();
        if let Err(e) = py.run(&code, Some(&locals), None) {
            e.display(py);
            panic!("python code failed");
        }
    });
}

#[test]
fn random_vector_and_region() {
    with_module(
        r#"
import json
rv = hs.RandomVector.from_json(json.dumps({"marginals": [{"family": "normal", "mu": 0, "sigma": 1}] * 2}))
assert rv.dim == 2
assert len(rv.sample(10, 1)) == 10
r = hs.HdrRegion.estimate(rv, 0.01, 0.02, 3)
assert abs(r.level - 0.01 / (2 * 3.141592653589793)) < 0.1 * r.level
x = r.sample(50, 4)
assert all(r.contains(p) for p in x)
stat, p = r.ks_uniformity(x)
assert 0 <= stat <= 1 and 0 <= p <= 1
"#,
    );
}

#[test]
fn surrogate_and_reliability() {
    with_module(
        r#"
p = hs.Problem("ddim:2:1e-2")
assert p.dim == 2 and "franke" in hs.problem_names()
x = p.rv.sample(40, 5)
m = hs.Surrogate.train("pce", x, p.evaluate(x), p.rv)
assert m.kind == "pce"
assert 0 <= m.loo(x, p.evaluate(x)) < 0.1
e = m.failure_probability(p.threshold, "is", 0.05, 1)
assert abs(e.beta - p.reference[0]) < 0.1, e
"#,
    );
}

#[test]
fn errors_map_to_python_exceptions() {
    with_module(
        r#"
for bad in (lambda: hs.Problem("nope"), lambda: hs.RandomVector.from_json("{}")):
    try:
        bad()
    except (ValueError, RuntimeError):
        pass
    else:
        raise AssertionError("expected an exception")
"#,
    );
}
