from pathlib import Path

test_configs_dir = Path(__file__).resolve().parent
small_run_config = test_configs_dir / "small_run.yml"
