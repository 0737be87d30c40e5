from pathlib import Path

test_data_dir = Path(__file__).resolve().parent
assert test_data_dir.is_dir()
small_scenario_path = test_data_dir / "small_scenario.json"
assert small_scenario_path.is_file()
