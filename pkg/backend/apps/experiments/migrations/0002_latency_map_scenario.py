from django.db import migrations, models


class Migration(migrations.Migration):

    dependencies = [
        ('experiments', '0001_initial'),
    ]

    operations = [
        migrations.AlterField(
            model_name='experimentrun',
            name='scenario',
            field=models.CharField(choices=[('profile', '地址画像'), ('toy-attack', '玩具受害者攻击'), ('aes-attack', 'AES 末轮密钥恢复'), ('covert', '隐蔽信道'), ('defense', '均匀延迟防御'), ('noc-sweep', '片上网络饱和扫描'), ('prefetchw-timer', 'PREFETCHW 计时探针'), ('classifier', '分类器表决'), ('latency-map', '单行延迟地图')], max_length=32, verbose_name='场景'),
        ),
    ]
