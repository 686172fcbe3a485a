"""
RunConfig validation.

A run is configured from three layers, later layers winning: settings
defaults, an optional JSON config file, explicit command-line flags. The
merged dictionary is validated here; unknown keys are rejected at both
the top level and inside the command-specific "params" block.

Config file layout:

    {
        "seed": 7, "n": 10000, "n_reps": 100, "output_dir": "reports",
        "csv": true, "json": false, "svg": true, "workers": 4,
        "params": {"threshold": 0.5, "scenarios": ["scar"]}
    }
"""

import os
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict

from rest_framework import serializers

from evaluation.metrics import MetricName
from synthetic.dgp import DeltaMode, Scenario


class Command(Enum):
    SCENARIOS = 'scenarios'
    DEPLOY_SWEEP = 'deploy_sweep'
    CALIBRATION = 'calibration'
    VALIDATE = 'validate'


FAULT_NONE = 'none'
FAULT_WEIGHTS_NOT_INVERTED = 'weights-not-inverted'

# clinical_all runs the sweeps once per CLINICAL_PREVALENCES entry
POPULATION_SOURCES = ['dgp', 'clinical', 'clinical_all', 'external']


@dataclass(frozen=True)
class RunConfig:
    command: Command
    seed: int
    n: int
    n_reps: int
    output_dir: Path
    csv: bool = True
    json: bool = False
    svg: bool = True
    workers: int = 1
    params: Dict[str, Any] = field(default_factory=dict)


class StrictSerializer(serializers.Serializer):
    """Rejects keys that are not declared fields."""

    def to_internal_value(self, data):
        if isinstance(data, dict):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError({key: ['Unknown configuration key.'] for key in unknown})
        return super().to_internal_value(data)


class ScenarioParamsSerializer(StrictSerializer):
    threshold = serializers.FloatField(min_value=0.0, max_value=1.0)
    bins = serializers.IntegerField(min_value=1)
    delta_mode = serializers.ChoiceField(choices=[m.value for m in DeltaMode])
    scenarios = serializers.ListField(
        child=serializers.ChoiceField(choices=[s.value for s in Scenario]), allow_empty=False
    )
    metrics = serializers.ListField(
        child=serializers.ChoiceField(choices=[m.value for m in MetricName]), allow_empty=False
    )

    def validate_scenarios(self, value):
        return list(dict.fromkeys(value))

    def validate_metrics(self, value):
        return list(dict.fromkeys(value))


class DeploySweepParamsSerializer(StrictSerializer):
    p_t = serializers.FloatField()
    p_withhold = serializers.FloatField(min_value=0.0, max_value=1.0)
    pt_grid = serializers.ListField(child=serializers.FloatField(), allow_empty=False, required=False)
    withhold_grid = serializers.ListField(child=serializers.FloatField(), allow_empty=False, required=False)
    pop = serializers.ChoiceField(choices=POPULATION_SOURCES)
    prevalence = serializers.FloatField()
    separation = serializers.FloatField()
    file = serializers.CharField(required=False, allow_blank=False)
    resample_population = serializers.BooleanField()

    def validate_p_t(self, value):
        if not 0.5 < value < 1.0:
            raise serializers.ValidationError('p_t must lie in (0.5, 1).')
        return value

    def validate_prevalence(self, value):
        if not 0.0 < value < 1.0:
            raise serializers.ValidationError('prevalence must lie in (0, 1).')
        return value

    def validate_separation(self, value):
        if value <= 0.0:
            raise serializers.ValidationError('separation must be positive.')
        return value

    def validate(self, attrs):
        if attrs['pop'] == 'external' and not attrs.get('file'):
            raise serializers.ValidationError({'file': ['--pop external needs --file.']})
        if attrs['pop'] == 'external' and attrs['resample_population']:
            raise serializers.ValidationError(
                {'resample_population': ['an external population cannot be resampled.']}
            )
        return attrs


class ValidateParamsSerializer(StrictSerializer):
    quick = serializers.BooleanField()
    fault = serializers.ChoiceField(choices=[FAULT_NONE, FAULT_WEIGHTS_NOT_INVERTED])


PARAMS_SERIALIZERS = {
    Command.SCENARIOS: ScenarioParamsSerializer,
    Command.CALIBRATION: ScenarioParamsSerializer,
    Command.DEPLOY_SWEEP: DeploySweepParamsSerializer,
    Command.VALIDATE: ValidateParamsSerializer,
}


class RunConfigSerializer(StrictSerializer):
    command = serializers.ChoiceField(choices=[c.value for c in Command])
    seed = serializers.IntegerField(min_value=0)
    n = serializers.IntegerField(min_value=1)
    n_reps = serializers.IntegerField(min_value=1)
    output_dir = serializers.CharField()
    csv = serializers.BooleanField()
    json = serializers.BooleanField()
    svg = serializers.BooleanField()
    workers = serializers.IntegerField(min_value=1)
    params = serializers.DictField()

    def validate_output_dir(self, value):
        path = Path(value)
        try:
            path.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise serializers.ValidationError(f'cannot create {path}: {exc.strerror}')
        if not os.access(path, os.W_OK):
            raise serializers.ValidationError(f'{path} is not writable.')
        return value

    def validate(self, attrs):
        command = Command(attrs['command'])
        params = PARAMS_SERIALIZERS[command](data=attrs['params'])
        if not params.is_valid():
            raise serializers.ValidationError({'params': params.errors})
        attrs['params'] = dict(params.validated_data)
        return attrs

    def to_run_config(self) -> RunConfig:
        data = self.validated_data
        return RunConfig(
            command=Command(data['command']),
            seed=data['seed'],
            n=data['n'],
            n_reps=data['n_reps'],
            output_dir=Path(data['output_dir']),
            csv=data['csv'],
            json=data['json'],
            svg=data['svg'],
            workers=data['workers'],
            params=data['params'],
        )


def format_errors(errors, prefix='') -> str:
    """Flatten DRF error dictionaries into 'key: message' lines."""
    lines = []
    if isinstance(errors, dict):
        for key, value in errors.items():
            name = key if key != 'non_field_errors' else ''
            lines.append(format_errors(value, f'{prefix}{name}.' if name else prefix))
    elif isinstance(errors, list):
        for value in errors:
            lines.append(format_errors(value, prefix))
    else:
        lines.append(f'{prefix.rstrip(".")}: {errors}' if prefix else str(errors))
    return '\n'.join(line for line in lines if line)


class PropertyResultSerializer(serializers.Serializer):
    name = serializers.CharField()
    passed = serializers.BooleanField()
    checked = serializers.IntegerField()
    detail = serializers.CharField(allow_blank=True)
    counterexample = serializers.DictField(allow_null=True)
