from cli.base import ScenarioSuiteCommand
from cli.serializers import Command as RunCommand
from evaluation.metrics import MetricName
from experiments.reports import calibration_csv, table1_report


class Command(ScenarioSuiteCommand):
    help = 'Run the label-selection scenarios and write the actual / observed / weighted metric table'
    run_command = RunCommand.SCENARIOS

    def add_command_arguments(self, parser):
        super().add_command_arguments(parser)
        parser.add_argument('--metric', action='append', choices=[m.value for m in MetricName],
                            help='Report only this metric (repeatable)')

    def run(self, cfg):
        results, failed = self.run_suite(cfg, self.selected_metrics(cfg))
        if results:
            report = table1_report(results, scenarios=[r.spec.scenario for r in results])
            text = report.to_text()
            self.stdout.write(text)
            self.write_report(cfg, 'table1.txt', text)
            if cfg.csv:
                self.write_report(cfg, 'table1.csv', report.to_csv())
                self.write_report(cfg, 'calibration.csv', calibration_csv(results))
            self.write_results_json(cfg, 'table1.json', results)
            self.write_calibration_figures(cfg, results)

        self.raise_for_failures(failed)
        self.stdout.write(self.style.SUCCESS(f'{len(results)} scenario(s) done'))
