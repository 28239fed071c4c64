from django.apps import AppConfig


class FreesetsConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'freesets'
    verbose_name = 'Free conic descriptions'
