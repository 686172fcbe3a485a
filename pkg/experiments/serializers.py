from rest_framework import serializers

from .runner import Estimator


class PointIntervalSerializer(serializers.Serializer):
    mean = serializers.FloatField(allow_null=True)
    lo = serializers.FloatField(allow_null=True)
    hi = serializers.FloatField(allow_null=True)
    n_values = serializers.IntegerField()
    n_undefined = serializers.IntegerField()


class MetricTripletSerializer(serializers.Serializer):
    metric = serializers.CharField(source='metric_name.value')
    actual = PointIntervalSerializer()
    observed = PointIntervalSerializer()
    weighted = PointIntervalSerializer()
    flagged = serializers.BooleanField()


class CalibrationBinSummarySerializer(serializers.Serializer):
    bin_index = serializers.IntegerField()
    bin_lo = serializers.FloatField()
    bin_hi = serializers.FloatField()
    mean_pred = serializers.FloatField(allow_null=True)
    prevalence = PointIntervalSerializer()
    weight_mass = serializers.FloatField()
    n_with_data = serializers.IntegerField()


class ScenarioSpecSerializer(serializers.Serializer):
    scenario = serializers.CharField(source='slug')
    number = serializers.IntegerField(source='scenario.number')
    pi1 = serializers.FloatField(allow_null=True)
    pi2 = serializers.FloatField(allow_null=True)
    alpha = serializers.FloatField(source='dgp.alpha')
    beta = serializers.FloatField(source='dgp.beta')
    omega1 = serializers.FloatField(source='dgp.omega1')
    omega2 = serializers.FloatField(source='dgp.omega2')
    gamma = serializers.FloatField(source='dgp.gamma')
    delta_mode = serializers.CharField(source='delta_mode.value')


class ScenarioResultSerializer(serializers.Serializer):
    """Field list of one entry in table1.json."""
    spec = ScenarioSpecSerializer()
    n = serializers.IntegerField()
    n_reps = serializers.IntegerField()
    threshold = serializers.FloatField()
    n_bins = serializers.IntegerField()
    mean_observed_fraction = serializers.FloatField()
    triplets = MetricTripletSerializer(many=True)
    calibration = serializers.SerializerMethodField()

    def get_calibration(self, obj):
        return {
            estimator.value: CalibrationBinSummarySerializer(obj.calibration[estimator], many=True).data
            for estimator in Estimator
        }
