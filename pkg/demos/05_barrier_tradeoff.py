"""The response-time barrier: trading commit rate against latency.

Under sustained overload the locking phase queues transactions and the
mean response time grows without bound.  The barrier beta caps that: when
the estimated response time (mean read-to-write service time times queue
length + 1) exceeds beta while the commit rate is still low, the item is
forced back to optimistic control, the queue drains as a burst of cheap
aborts, and latency stays bounded.  Sweeping beta shows the dial: small
beta, short response times, low effective commit rate; large beta, the
reverse.  The cost model prices the two failure modes against each other.
"""

from adaptivecc import (
    AdaptationConfig,
    CostModel,
    EpochProfile,
    Mode,
    W2,
    cost_tradeoff,
    run_experiment,
)

SCALED_W2 = tuple(round(lam * 0.2, 1) for lam in W2)


def main():
    profile = EpochProfile(lambdas=SCALED_W2, dt_min_ms=100, dt_max_ms=1000, seed=7)
    print(f"overload ramp (tas/sec per epoch): {SCALED_W2}")
    print()
    print(f"{'beta':>8} {'mean rt':>10} {'cr_eff':>8} {'barrier switches':>17}")
    for beta in (500.0, 1000.0, 3000.0, 8000.0, None):
        config = AdaptationConfig(
            gamma=0.9, delta=0.05, beta=beta, mode=Mode.PER_TERMINATION
        )
        result = run_experiment(profile, config)
        switches = sum(1 for e in result.adapt_events if e.rule == "barrier-exceeded")
        label = f"{beta:.0f}" if beta is not None else "off"
        print(f"{label:>8} {result.summary.mean_rt_ms:7.0f} ms {result.summary.mean_cr_eff:8.1%} "
              f"{switches:>17}")

    print()
    print("pricing lost transactions (r=1.0) against SLA penalties (p=2.5):")
    model = CostModel(r=1.0, p=2.5)
    for cr, frac_violating in ((0.3, 0.02), (0.6, 0.10), (0.9, 0.35)):
        abort_cost, penalty_cost = cost_tradeoff(model, cr, frac_violating, tas=1000)
        print(f"  cr={cr:.1f}: aborts cost {abort_cost:7.0f}, "
              f"SLA penalties cost {penalty_cost:7.0f}")


if __name__ == "__main__":
    main()
