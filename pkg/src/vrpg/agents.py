"""Per-step training agents.

Composes environments, policies, traces, and learners into the four on-board
algorithms:

  vomps      ratio-reweighted emphatic gradient + recursive-momentum actor
  ace-storm  interest-only emphatic gradient + recursive-momentum actor
  geoffpac   ratio-reweighted emphatic gradient + constant-stepsize actor
  ace        interest-only emphatic gradient + constant-stepsize actor

Agents can run with learned value/ratio approximators or, for tabular tasks,
with both recomputed exactly by dynamic programming each time the policy
changes (the protocol used for the two-circle experiment).
"""

import numpy as np

from . import oracle
from .learners import StormState, storm_step
from .policies import importance_ratio, DEFAULT_RHO_MAX
from .traces import AceTraceState, GeoffTraceState, ace_trace_step, \
    geoffpac_trace_step

ALGORITHMS = ("vomps", "ace-storm", "geoffpac", "ace")


def clip_norm(z, z_max):
    """Rescale z to norm z_max if it is larger; exact identity otherwise."""
    n = float(np.linalg.norm(z))
    if n > z_max:
        return z * (z_max / n)
    return z


class Agent:
    def __init__(self, algo, policy, behavior, *, gamma, gamma_hat=0.0,
                 lam1=0.0, lam2=0.0, critic=None, ratio=None, storm=None,
                 eta=None, rho_max=DEFAULT_RHO_MAX, z_max=np.inf, dp_mdp=None,
                 force_alpha_one=False, eta_override=None):
        if algo not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {algo!r}; expected one of {ALGORITHMS}")
        self.algo = algo
        self.policy = policy
        self.behavior = behavior
        self.gamma = gamma
        self.lam1 = lam1
        self.lam2 = lam2
        self.rho_max = rho_max
        self.z_max = z_max
        self.dp_mdp = dp_mdp
        self.force_alpha_one = force_alpha_one
        self.eta_override = eta_override

        self.uses_ratio = algo in ("vomps", "geoffpac")
        self.uses_storm = algo in ("vomps", "ace-storm")
        self.gamma_hat = gamma_hat if self.uses_ratio else 0.0

        self.critic = critic
        self.ratio = ratio
        if dp_mdp is None and critic is None:
            raise ValueError(f"{algo} needs a critic (or a dp_mdp)")
        if self.uses_ratio and dp_mdp is None and ratio is None:
            raise ValueError(f"{algo} needs a ratio function (or a dp_mdp)")
        if self.uses_storm:
            self.storm = storm if storm is not None else StormState(
                k=0.1, w=10.0, beta=100.0)
            self.eta = None
        else:
            if eta is None:
                raise ValueError(f"{algo} needs a fixed actor stepsize")
            self.storm = None
            self.eta = eta

        if self.uses_ratio:
            self.trace = GeoffTraceState.initial(policy.n_params)
        else:
            self.trace = AceTraceState.initial()
        self.theta_prev = policy.get_flat()
        self.t = 0
        self.last_eta = np.nan
        self.last_g_norm = np.nan
        self._dp_cache = None

        if dp_mdp is not None:
            self._dp_mu = oracle.uniform_policy(dp_mdp)

    # -- exact value/ratio tables for the dynamic-programming protocol --------

    def _dp_tables(self):
        if self._dp_cache is None:
            pi = self.policy.prob_table()
            V = oracle.value_function(self.dp_mdp, pi)
            if self.uses_ratio:
                C = oracle.exact_density_ratio(self.dp_mdp, pi, self._dp_mu,
                                               self.gamma_hat)
            else:
                C = None
            self._dp_cache = (V, C)
        return self._dp_cache

    def step(self, tr, gamma_t):
        """Consume one behavior transition: critic, ratio, traces, actor, in order."""
        rho = importance_ratio(self.policy, self.behavior, tr.s, tr.a,
                               self.rho_max)

        if self.dp_mdp is not None:
            V, C = self._dp_tables()
            delta = tr.r + gamma_t * V[tr.s_next] - V[tr.s]
            v_now = V[tr.s]
            c_now = C[tr.s] if self.uses_ratio else 1.0
        else:
            v_now = self.critic.value_fn.value(tr.s)
            delta = self.critic.update(tr, gamma_t)
            if self.uses_ratio:
                self.ratio.update(tr, rho)
                c_now = self.ratio.ratio_fn.value(tr.s)
            else:
                c_now = 1.0

        glp_now = self.policy.log_prob_grad(tr.s, tr.a)
        if self.uses_storm:
            glp_prev = self.policy.log_prob_grad(tr.s, tr.a, flat=self.theta_prev)
        else:
            glp_prev = glp_now  # baselines never use the previous-parameter score

        if self.uses_ratio:
            self.trace, out = geoffpac_trace_step(
                self.trace, rho=rho, c_now=c_now, v_now=v_now, delta=delta,
                glp_now=glp_now, glp_now_at_prev_params=glp_prev,
                gamma=self.gamma, gamma_hat=self.gamma_hat,
                lam1=self.lam1, lam2=self.lam2)
        else:
            self.trace, out = ace_trace_step(
                self.trace, rho=rho, delta=delta, glp_now=glp_now,
                glp_at_prev_params=glp_prev, gamma=self.gamma, lam1=self.lam1)

        # The momentum recursion assumes a bounded gradient oracle; rare
        # emphatic-trace spikes violate that and can crash the adaptive
        # stepsize for the rest of a run, so the sample is norm-clipped
        # (both evaluations, for a consistent correction term).
        z_now = clip_norm(out.z_now, self.z_max)
        if self.uses_storm:
            z_prev = clip_norm(out.z_prev, self.z_max)
            self.storm, g, eta = storm_step(self.storm, z_now, z_prev,
                                            force_alpha_one=self.force_alpha_one)
            if self.eta_override is not None:
                eta = self.eta_override
        else:
            g, eta = z_now, self.eta

        theta = self.policy.get_flat()
        self.theta_prev = theta
        self.policy.set_flat(theta + eta * g)
        self._dp_cache = None
        self.t += 1
        self.last_eta = eta
        self.last_g_norm = float(np.linalg.norm(g))


class TrainLog:
    """Per-run actor stepsize series plus thinned parameter checkpoints."""

    def __init__(self, checkpoint_every=None):
        self.etas = []
        self.checkpoint_every = checkpoint_every
        self.checkpoints = []      # (step, theta copy)
        self.bucket_mass = []      # sum of 1/eta^2 since the previous checkpoint
        self._pending_mass = 0.0

    def record(self, step, agent):
        eta = agent.last_eta
        self.etas.append(eta)
        if self.checkpoint_every:
            self._pending_mass += 1.0 / eta ** 2
            if step % self.checkpoint_every == 0:
                self.checkpoints.append((step, agent.policy.get_flat()))
                self.bucket_mass.append(self._pending_mass)
                self._pending_mass = 0.0


def train(agent, task, steps, rng, *, hook=None, hook_every=None, log=None):
    """Run the sample-step-update loop for `steps` transitions.

    `hook(t, agent)` is invoked after every `hook_every` steps (and once at
    t=0 before any update) for evaluation snapshots.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if hook is not None and hook_every:
        hook(0, agent)
    for t in range(1, steps + 1):
        a = agent.behavior.sample(task.state, rng)
        tr, gamma_t = task.step(a)
        agent.step(tr, gamma_t)
        if log is not None:
            log.record(t, agent)
        if hook is not None and hook_every and t % hook_every == 0:
            hook(t, agent)
    return agent


def output_policy(agent, mode="final", log=None, rng=None):
    """Final parameters, or a checkpoint drawn with mass proportional to 1/eta^2."""
    if mode == "final":
        return agent.policy.get_flat()
    if mode != "sampled":
        raise ValueError(f"unknown output mode {mode!r}")
    if log is None or not log.checkpoints:
        raise ValueError("sampled output mode requires recorded checkpoints")
    weights = np.asarray(log.bucket_mass, dtype=float)
    probs = weights / weights.sum()
    idx = int(rng.choice(len(probs), p=probs))
    return log.checkpoints[idx][1].copy()
