from rest_framework import serializers

from experiments.serializers import PointIntervalSerializer


class ScoredPopulationSerializer(serializers.Serializer):
    provenance = serializers.CharField(source='provenance.value')
    size = serializers.IntegerField(source='__len__')
    prevalence = serializers.FloatField()
    n_positive = serializers.IntegerField()
    n_negative = serializers.IntegerField()
    source = serializers.CharField(allow_blank=True)


class SweepRowSerializer(serializers.Serializer):
    swept_param = serializers.CharField(source='swept_param.value')
    param_value = serializers.FloatField()
    actual = PointIntervalSerializer()
    observed = PointIntervalSerializer()
    weighted = PointIntervalSerializer()
    mean_observed_fraction = serializers.FloatField()


class SweepReportSerializer(serializers.Serializer):
    """Field list of sweeps.json."""
    population = ScoredPopulationSerializer()
    p_t_sweep = SweepRowSerializer(many=True)
    p_withhold_sweep = SweepRowSerializer(many=True)
