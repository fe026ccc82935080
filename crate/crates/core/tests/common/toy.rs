//! Small random CSPs whose feasibility and optima are known by brute force.

use rand::Rng;
use zincpilot_core::corpus::{ExpectedOutput, Metadata, Objective, ProblemInput, ProblemInstance, SymbolSpec};
use zincpilot_core::dzn::{Bindings, Value};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Con {
    Ne(usize, usize),
    Lt(usize, usize),
    SumLe(usize, usize, i64),
    SumNe(usize, usize, i64),
    Eq(usize, i64),
}

impl Con {
    fn holds(self, a: &[i64]) -> bool {
        match self {
            Con::Ne(i, j) => a[i] != a[j],
            Con::Lt(i, j) => a[i] < a[j],
            Con::SumLe(i, j, c) => a[i] + a[j] <= c,
            Con::SumNe(i, j, c) => a[i] + a[j] != c,
            Con::Eq(i, c) => a[i] == c,
        }
    }

    fn mzn(self) -> String {
        let x = |i: usize| format!("x{}", i + 1);
        match self {
            Con::Ne(i, j) => format!("{} != {}", x(i), x(j)),
            Con::Lt(i, j) => format!("{} < {}", x(i), x(j)),
            Con::SumLe(i, j, c) => format!("{} + {} <= {c}", x(i), x(j)),
            Con::SumNe(i, j, c) => format!("{} + {} != {c}", x(i), x(j)),
            Con::Eq(i, c) => format!("{} = {c}", x(i)),
        }
    }
}

/// Variables `x1..xn` over `1..domains[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyCsp {
    pub domains: Vec<i64>,
    pub constraints: Vec<Con>,
    pub weights: Vec<i64>,
}

impl ToyCsp {
    /// At most four variables with domains of at most four values, and at
    /// most `max_space` full assignments.
    pub fn random(rng: &mut impl Rng, max_space: i64) -> Self {
        let domains = loop {
            let n = rng.random_range(1..=4);
            let d: Vec<i64> = (0..n).map(|_| rng.random_range(1..=4)).collect();
            if d.iter().product::<i64>() <= max_space {
                break d;
            }
        };
        let n = domains.len();
        let constraints = (0..rng.random_range(1..=3))
            .map(|_| Self::random_con(rng, &domains))
            .collect();
        let weights = (0..n).map(|_| [-3, -2, -1, 1, 2, 3][rng.random_range(0..6)]).collect();
        Self {
            domains,
            constraints,
            weights,
        }
    }

    pub fn random_con(rng: &mut impl Rng, domains: &[i64]) -> Con {
        let n = domains.len();
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        let c = rng.random_range(1..=6);
        match (rng.random_range(0..5), i == j) {
            (0, false) => Con::Ne(i, j),
            (1, false) => Con::Lt(i, j),
            (2, _) => Con::SumLe(i, j, c),
            (3, _) => Con::SumNe(i, j, c),
            _ => Con::Eq(i, rng.random_range(1..=domains[i] + 1)),
        }
    }

    pub fn vars(&self) -> Vec<String> {
        (1..=self.domains.len()).map(|i| format!("x{i}")).collect()
    }

    pub fn holds(&self, a: &[i64]) -> bool {
        self.constraints.iter().all(|c| c.holds(a))
    }

    pub fn assignments(&self) -> Vec<Vec<i64>> {
        let mut out = vec![vec![]];
        for &d in &self.domains {
            out = out
                .into_iter()
                .flat_map(|p: Vec<i64>| (1..=d).map(move |v| [p.clone(), vec![v]].concat()))
                .collect();
        }
        out
    }

    pub fn cost(&self, a: &[i64]) -> i64 {
        self.weights.iter().zip(a).map(|(w, v)| w * v).sum()
    }

    /// Exhaustive minimum of the weighted sum; `None` when infeasible.
    pub fn optimum(&self) -> Option<i64> {
        self.assignments()
            .iter()
            .filter(|a| self.holds(a))
            .map(|a| self.cost(a))
            .min()
    }

    pub fn model(&self, objective: Objective) -> String {
        let mut m = String::new();
        for (i, d) in self.domains.iter().enumerate() {
            m.push_str(&format!("var 1..{d}: x{};\n", i + 1));
        }
        for c in &self.constraints {
            m.push_str(&format!("constraint {};\n", c.mzn()));
        }
        let cost: Vec<String> = self
            .weights
            .iter()
            .enumerate()
            .map(|(i, w)| format!("({w})*x{}", i + 1))
            .collect();
        match objective {
            Objective::Satisfy => m.push_str("solve satisfy;\n"),
            Objective::Minimize => m.push_str(&format!("solve minimize {};\n", cost.join(" + "))),
            Objective::Maximize => m.push_str(&format!("solve maximize {};\n", cost.join(" + "))),
        }
        m
    }

    pub fn bindings(&self, a: &[i64]) -> Bindings {
        let mut b = Bindings::new();
        for (name, v) in self.vars().into_iter().zip(a) {
            b.insert(name, Value::Int(*v));
        }
        b
    }

    /// A corpus instance with this CSP as ground truth.
    pub fn instance(&self, id: &str, objective: Objective) -> ProblemInstance {
        let expected = match objective {
            Objective::Satisfy => {
                let first = self.assignments().into_iter().find(|a| self.holds(a));
                ExpectedOutput {
                    objective_value: None,
                    variable_values: first
                        .as_ref()
                        .map(|a| self.vars().into_iter().zip(a).map(|(k, v)| (k, (*v).into())).collect())
                        .unwrap_or_default(),
                    unsatisfiable: first.is_none(),
                }
            }
            _ => {
                let opt = self.optimum();
                ExpectedOutput {
                    objective_value: opt.map(|o| o as f64),
                    variable_values: Default::default(),
                    unsatisfiable: opt.is_none(),
                }
            }
        };
        ProblemInstance {
            input: ProblemInput {
                description: "Toy constraint problem.".into(),
                parameters: vec![],
                output: self
                    .vars()
                    .into_iter()
                    .map(|symbol| SymbolSpec {
                        definition: "decision".into(),
                        symbol,
                        shape: vec![],
                    })
                    .collect(),
                metadata: Metadata {
                    title: "Toy".into(),
                    identifier: id.into(),
                    domain: "Toy".into(),
                    subdomain: None,
                    objective,
                    keywords: vec![],
                    extra: Default::default(),
                },
            },
            data_text: String::new(),
            ground_truth_model: Some(self.model(objective)),
            expected_output: Some(expected),
            verified: true,
            extra: Default::default(),
        }
    }
}
