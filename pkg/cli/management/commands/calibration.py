from cli.base import ScenarioSuiteCommand
from cli.serializers import Command as RunCommand
from experiments.reports import calibration_csv


class Command(ScenarioSuiteCommand):
    help = 'Estimate actual / observed / weighted calibration curves for the label-selection scenarios'
    run_command = RunCommand.CALIBRATION

    def run(self, cfg):
        results, failed = self.run_suite(cfg, metrics=())
        if results:
            for result in results:
                self.stdout.write(f'{result.spec.slug}: mean observed fraction {result.mean_observed_fraction:.3f}')
            if cfg.csv:
                self.write_report(cfg, 'calibration.csv', calibration_csv(results))
            self.write_results_json(cfg, 'calibration.json', results)
            self.write_calibration_figures(cfg, results)

        self.raise_for_failures(failed)
        self.stdout.write(self.style.SUCCESS(f'{len(results)} calibration panel(s) done'))
