from django.apps import AppConfig


class DeploymentSimulationConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'deployment'
    verbose_name = 'Deployment feedback simulation'
