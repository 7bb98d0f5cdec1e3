from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('scenario', models.CharField(choices=[('profile', '地址画像'), ('toy-attack', '玩具受害者攻击'), ('aes-attack', 'AES 末轮密钥恢复'), ('covert', '隐蔽信道'), ('defense', '均匀延迟防御'), ('noc-sweep', '片上网络饱和扫描'), ('prefetchw-timer', 'PREFETCHW 计时探针'), ('classifier', '分类器表决')], max_length=32, verbose_name='场景')),
                ('seed', models.BigIntegerField(default=0, verbose_name='种子')),
                ('config', models.JSONField(default=dict, verbose_name='已解析配置')),
                ('status', models.CharField(choices=[('pending', '待运行'), ('running', '运行中'), ('passed', '检查通过'), ('failed', '检查未通过'), ('error', '出错')], default='pending', max_length=20, verbose_name='状态')),
                ('metrics', models.JSONField(blank=True, default=dict, verbose_name='指标')),
                ('checks', models.JSONField(blank=True, default=list, verbose_name='检查结果')),
                ('artifacts', models.JSONField(blank=True, default=list, verbose_name='产物路径')),
                ('runtime_seconds', models.FloatField(blank=True, null=True, verbose_name='耗时(秒)')),
                ('error_message', models.TextField(blank=True, verbose_name='错误信息')),
                ('task_id', models.CharField(blank=True, max_length=255, verbose_name='Celery任务ID')),
                ('created_at', models.DateTimeField(auto_now_add=True, verbose_name='创建时间')),
                ('completed_at', models.DateTimeField(blank=True, null=True, verbose_name='完成时间')),
            ],
            options={
                'verbose_name': '实验运行',
                'verbose_name_plural': '实验运行',
                'db_table': 'experiment_runs',
                'ordering': ['-created_at'],
                'indexes': [models.Index(fields=['scenario', 'seed', '-created_at'], name='experiment_scenario_seed_idx')],
            },
        ),
    ]
