"""How much the support is worth.

With the support taken from the true image ("oracle") the truncated model
only regularizes coefficients that really should be small, and the gain over
plain l0 is large. The practical method has to detect the support from a
restoration, and inherits that restoration's errors.

Four framelet levels; expect a couple of minutes on one core.

    python demos/03_oracle_vs_practical.py
"""

from sdsr import BlurOperator, SolverConfig, cameraman, degrade, get_scenario, mdal_solve, sdsr_run

truth = cameraman()
sc = get_scenario(3)
f = degrade(truth, sc, seed=0)
op = BlurOperator.from_kind(sc.psf_kind, truth.shape)

ref, rep = mdal_solve(f, op, None, SolverConfig(regularizer="plain_l0", lam=0.8192, track_ssim=False), f,
                      truth=truth)
print(f"plain l0 reference: {rep.final_psnr:.2f} dB")

cfg = SolverConfig(levels=4, stages=1, lam=13.1072, track_ssim=False)
_, (oracle,) = sdsr_run(f, op, cfg, truth, truth=truth, oracle=True)
print(f"oracle support:     {oracle.final_psnr:.2f} dB / {oracle.final_ssim:.4f}")

_, reports = sdsr_run(f, op, cfg.with_(stages=2, lam=3.2768), ref, truth=truth)
print(f"detected support:   {reports[-1].final_psnr:.2f} dB / {reports[-1].final_ssim:.4f} "
      f"(accuracy {100 * reports[-1].accuracy:.1f}%)")
