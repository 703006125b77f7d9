"""Fit contact coefficients on a low drop and check them on a higher one.

Synthetic observations stand in for motion-capture data: the 0.05 m drop is
sampled at 1 kHz with 1% velocity noise, the coefficients are fitted, and
the fit is scored against a clean 0.2 m drop it has not seen.

    python3 demos/identify_and_validate.py
"""

from lcsdrone import Mode, drop_test_scenario, fit_contact_params, mode_params, observed_from_trajectory, simulate
from lcsdrone import validate_params


def main():
    for mode in Mode:
        true = mode_params(mode)
        fit_sc = drop_test_scenario(0.05, mode, duration=0.6)
        obs = observed_from_trajectory(simulate(fit_sc), stride=10, velocity_noise=0.01, seed=1)
        fit = fit_contact_params(obs, fit_sc)
        p = fit.params
        print(f"{mode.name.lower()}: k {p.k:8.1f} (true {true.k:g})  f {p.f:6.2f} (true {true.f:g})  "
              f"objective {fit.objective:.2e} after {fit.iterations} iterations")

        val_sc = drop_test_scenario(0.2, mode, duration=0.6)
        held = observed_from_trajectory(simulate(val_sc), stride=10)
        report = validate_params(p, held, val_sc)
        for name in ("contact_time", "rebound_velocity", "x", "xdot"):
            ch = report.channels[name]
            print(f"    {name:17s} observed {ch.peak_observed:8.4f}  simulated {ch.peak_simulated:8.4f}  "
                  f"accuracy {100 * ch.peak_accuracy:6.2f}%")


if __name__ == "__main__":
    main()
