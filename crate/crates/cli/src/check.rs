//! Self-tests run by `arto check`.

use arto::config::Config;
use arto::gradient::gradient;
use arto::lip::Propagator;
use arto::lip::{
    closed_form_step, propagate_integrated, ComState, FootPosition, Integrator, LipParams,
};
use arto::problem::{
    hard_constraints, max_violation, nominal_plan, soft_cost, FootstepPlan, PlanningProblem,
    PlanningState, Reference, Side,
};
use arto::quintic::{quintic, Boundary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Outcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// A random state and a plan that satisfies every hard constraint from it.
fn feasible_sample(
    rng: &mut ChaCha8Rng,
    problem: &PlanningProblem,
    half_width: f64,
) -> (PlanningState, FootstepPlan) {
    loop {
        let stance = if rng.random_bool(0.5) {
            Side::Left
        } else {
            Side::Right
        };
        let state = PlanningState {
            com: ComState::new(
                rng.random_range(-0.05..0.05),
                rng.random_range(-0.05..0.05),
                rng.random_range(-0.3..0.3),
                rng.random_range(-0.3..0.3),
            ),
            foot: FootPosition::new(0.0, stance.sign() * half_width),
            stance,
            time_in_step: rng.random_range(0.0..0.1),
        };
        let mut plan = nominal_plan(&state, problem, half_width, 0.35);
        let mut z = plan.decision_vector();
        for v in &mut z {
            *v += rng.random_range(-0.03..0.03);
        }
        plan.set_decision_vector(&z);
        let r = hard_constraints(&plan, &state, problem, Propagator::Exact);
        if max_violation(&r) < 0.0 {
            return (state, plan);
        }
    }
}

fn gradient_check(cfg: &Config, rng: &mut ChaCha8Rng) -> Outcome {
    let problem = &cfg.experiment.run.planner.problem;
    let reference = Reference::new(0.1, 0.0);
    let mut worst = 0.0f64;
    for _ in 0..cfg.check_samples {
        let (state, plan) = feasible_sample(rng, problem, cfg.experiment.half_width);
        let g = gradient(&plan, &state, &reference, problem, f64::INFINITY).to_vector();
        let z = plan.decision_vector();
        for (i, gi) in g.iter().enumerate() {
            let h = 1e-6;
            let eval = |d: f64| {
                let mut zz = z.clone();
                zz[i] += d;
                soft_cost(&plan.with_decision_vector(&zz), &state, &reference, problem)
                    .map_or(f64::NAN, |c| c.value)
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            let excess = (gi - fd).abs() / (1e-5 * fd.abs()).max(1e-8);
            worst = worst.max(if excess.is_nan() {
                f64::INFINITY
            } else {
                excess
            });
        }
    }
    Outcome {
        name: "gradient matches central differences",
        passed: worst <= 1.0,
        detail: format!(
            "{} plans, worst error / tolerance = {worst:.3}",
            cfg.check_samples
        ),
    }
}

fn integrator_check(rng: &mut ChaCha8Rng) -> Outcome {
    let params = LipParams::new(9.81, 0.8).expect("valid pendulum");
    let mut worst = [0.0f64; 3];
    let methods = [Integrator::Rk4, Integrator::Heun, Integrator::Euler];
    for _ in 0..1000 {
        let s = ComState::new(
            rng.random_range(-0.2..0.2),
            rng.random_range(-0.2..0.2),
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
        );
        let foot = FootPosition::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2));
        let dt = rng.random_range(0.0..0.8);
        let exact = closed_form_step(s, foot, dt, &params).expect("finite draw");
        let scale = exact
            .to_array()
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1e-12);
        for (w, m) in worst.iter_mut().zip(methods) {
            let a = propagate_integrated(s, foot, dt, &params, m, 6);
            let err = a
                .to_array()
                .iter()
                .zip(exact.to_array())
                .fold(0.0f64, |e, (x, y)| e.max((x - y).abs()));
            *w = w.max(err / scale);
        }
    }
    Outcome {
        name: "RK4(6) beats Heun and Euler against the closed form",
        passed: worst[0] < worst[1] && worst[1] < worst[2],
        detail: format!(
            "max relative error rk4 {:.2e}, heun {:.2e}, euler {:.2e}",
            worst[0], worst[1], worst[2]
        ),
    }
}

fn quintic_check(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let mut b = || Boundary {
            pos: rng.random_range(-1.0..1.0),
            vel: rng.random_range(-2.0..2.0),
            acc: rng.random_range(-5.0..5.0),
        };
        let (b0, b1) = (b(), b());
        let t = rng.random_range(0.1..1.5);
        let q = quintic(b0, b1, t).expect("positive duration");
        let (s, e) = (q.evaluate(0.0), q.evaluate(t));
        for (got, want) in [
            (s.pos, b0.pos),
            (s.vel, b0.vel),
            (s.acc, b0.acc),
            (e.pos, b1.pos),
            (e.vel, b1.vel),
            (e.acc, b1.acc),
        ] {
            worst = worst.max((got - want).abs());
        }
    }
    Outcome {
        name: "quintic boundary conditions",
        passed: worst <= 1e-10,
        detail: format!("worst boundary error {worst:.2e}"),
    }
}

pub fn run_all(cfg: &Config) -> Vec<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    vec![
        gradient_check(cfg, &mut rng),
        integrator_check(&mut rng),
        quintic_check(&mut rng),
    ]
}
