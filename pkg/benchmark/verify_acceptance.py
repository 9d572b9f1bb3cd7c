import json
import argparse


def verify_results(file_path):
    with open(file_path, 'r') as file:
        data = json.load(file)

    failed = [name for name, result in data.items() if not result["passed"]]
    assert not failed, f"Acceptance checks failed: {', '.join(failed)}"


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Verify acceptance results")
    parser.add_argument("file_path", type=str, help="Path to the json file")
    args = parser.parse_args()
    verify_results(args.file_path)
