from ifsresonance.scripts.run_experiment import run_experiment_cli

if __name__ == "__main__":
    run_experiment_cli()
