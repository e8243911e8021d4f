"""Sensitivity to the threshold ratio rho, through the experiment harness.

This is the programmatic form of::

    sdsr sweep-rho --scenario 3 --levels 1 --rho-grid 50 100 200 400 800 --out demo_output/sweep

It writes ``sweep_rho_cameraman_s3_L1.csv`` (one row per rho, best weight
each). It runs 55 solves, around ten minutes on one core; set SDSR_THREADS to
spread the rho values over processes.
"""

from sdsr import harness

cfg = harness.load_config(None, {
    "scenarios": "3", "levels": "1", "rho_grid": "50 100 200 400 800",
    "lam_grid_start": "4", "lam_grid_size": "5", "output_dir": "demo_output/sweep",
})
for row in harness.cmd_sweep_rho(cfg):
    print(f"rho={row['rho']:5g}  {row['psnr']:.2f} dB  ssim {row['ssim']:.4f}  lam={row['lam']:.4g}  "
          f"support accuracy {100 * row['ar']:.1f}%")
