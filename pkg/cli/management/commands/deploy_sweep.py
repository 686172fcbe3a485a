from functools import partial

from cli.base import SelectionEvalCommand, comma_floats
from cli.serializers import POPULATION_SOURCES
from cli.serializers import Command as RunCommand
from cli.svg import render_sweep_grid_svg
from deployment.populations import (
    CLINICAL_PREVALENCES,
    dgp_population,
    load_population_csv,
    synthetic_clinical_population,
)
from deployment.serializers import SweepReportSerializer
from deployment.sweeps import DEFAULT_P_T, DEFAULT_P_WITHHOLD, sweep_csv, sweep_p_t, sweep_p_withhold
from synthetic.seeding import STREAM_POPULATION, derive_seed

DEFAULT_SEPARATION = 2.0


def prevalence_tag(prevalence: float) -> str:
    return f'prev{round(prevalence * 100):02d}'


class Command(SelectionEvalCommand):
    help = 'Simulate a deployed model with randomized alert withholding and sweep p_t and p_withhold'
    run_command = RunCommand.DEPLOY_SWEEP
    reps_setting = 'SELECTION_EVAL_SWEEP_REPS'
    reps_default = 1000

    def add_command_arguments(self, parser):
        parser.add_argument('--p-t', type=float,
                            help=f'Alert threshold held fixed in the p_withhold sweep (default {DEFAULT_P_T})')
        parser.add_argument('--p-withhold', type=float,
                            help=f'Withholding probability held fixed in the p_t sweep (default {DEFAULT_P_WITHHOLD})')
        parser.add_argument('--pt-grid', type=comma_floats, help='Comma separated p_t values, strictly descending')
        parser.add_argument('--withhold-grid', type=comma_floats, help='Comma separated p_withhold values')
        parser.add_argument('--pop', choices=POPULATION_SOURCES,
                            help='Population source (default clinical); clinical_all runs every clinical prevalence')
        parser.add_argument('--prevalence', type=float, help='Prevalence of the synthetic clinical population')
        parser.add_argument('--separation', type=float, help='Class separation of the synthetic clinical population')
        parser.add_argument('--file', help='score,label CSV for --pop external')
        parser.add_argument('--resample-population', action='store_true', default=None,
                            help='Draw a fresh synthetic population for every replicate')

    def default_params(self):
        return {
            'p_t': DEFAULT_P_T,
            'p_withhold': DEFAULT_P_WITHHOLD,
            'pop': 'clinical',
            'prevalence': CLINICAL_PREVALENCES[1],
            'separation': DEFAULT_SEPARATION,
            'resample_population': False,
        }

    def param_flags(self, options):
        keys = ('p_t', 'p_withhold', 'pt_grid', 'withhold_grid', 'pop', 'prevalence', 'separation', 'file',
                'resample_population')
        return {key: options[key] for key in keys if options.get(key) is not None}

    def build_config(self, options):
        cfg = super().build_config(options)
        params = cfg.params
        single_point = {'p_t', 'p_withhold'} <= self.explicit_params
        if single_point and 'pt_grid' not in params and 'withhold_grid' not in params:
            params['pt_grid'] = [params['p_t']]
            params['withhold_grid'] = [params['p_withhold']]
        return cfg

    def populations(self, cfg):
        """(nominal prevalence, population, factory) triples; the prevalence is None for a single population."""
        params = cfg.params
        if params['pop'] == 'external':
            return [(None, load_population_csv(params['file']), None)]
        if params['pop'] == 'dgp':
            factory = partial(dgp_population, cfg.n)
            return [(None, factory(derive_seed(cfg.seed, STREAM_POPULATION)), factory)]
        if params['pop'] == 'clinical':
            factory = partial(synthetic_clinical_population, cfg.n, params['prevalence'], params['separation'])
            return [(None, factory(derive_seed(cfg.seed, STREAM_POPULATION)), factory)]

        populations = []
        for i, prevalence in enumerate(CLINICAL_PREVALENCES):
            factory = partial(synthetic_clinical_population, cfg.n, prevalence, params['separation'])
            populations.append((prevalence, factory(derive_seed(cfg.seed, STREAM_POPULATION, i)), factory))
        return populations

    def sweep(self, cfg, population, factory):
        params = cfg.params
        self.stdout.write(
            f'Population {population.provenance.value}: n={len(population)}, prevalence {population.prevalence:.3f}'
        )
        sweep_options = {
            'n_reps': cfg.n_reps,
            'seed': cfg.seed,
            'population_factory': factory,
            'resample_population': params['resample_population'],
            'workers': cfg.workers,
        }

        self.stdout.write(f'Sweeping p_t at p_withhold={params["p_withhold"]:g}')
        pt_rows = sweep_p_t(population, params.get('pt_grid'), p_withhold=params['p_withhold'], **sweep_options)
        self.stdout.write(f'Sweeping p_withhold at p_t={params["p_t"]:g}')
        withhold_rows = sweep_p_withhold(population, params.get('withhold_grid'), p_t=params['p_t'], **sweep_options)

        for row in pt_rows + withhold_rows:
            self.stdout.write(
                f'  {row.swept_param.value}={row.param_value:<8g} actual {row.actual.format(3)}  '
                f'observed {row.observed.format(3)}  weighted {row.weighted.format(3)}'
            )
        return pt_rows, withhold_rows

    def run(self, cfg):
        params = cfg.params
        columns = []
        for prevalence, population, factory in self.populations(cfg):
            pt_rows, withhold_rows = self.sweep(cfg, population, factory)
            suffix = '' if prevalence is None else f'_{prevalence_tag(prevalence)}'
            if cfg.csv:
                self.write_report(cfg, f'sweep_pt{suffix}.csv', sweep_csv(pt_rows))
                self.write_report(cfg, f'sweep_withhold{suffix}.csv', sweep_csv(withhold_rows))
            if cfg.json:
                report = {'population': population, 'p_t_sweep': pt_rows, 'p_withhold_sweep': withhold_rows}
                self.write_json(cfg, f'sweeps{suffix}.json', SweepReportSerializer(report).data)
            label = '' if prevalence is None else f'prevalence {prevalence:g}'
            columns.append((label, pt_rows, withhold_rows))

        if cfg.svg:
            self.write_report(cfg, 'sweeps.svg', render_sweep_grid_svg(
                columns, p_withhold=params['p_withhold'], p_t=params['p_t']
            ))
        rows = sum(len(pt) + len(withhold) for _, pt, withhold in columns)
        self.stdout.write(self.style.SUCCESS(f'{rows} sweep rows done'))
