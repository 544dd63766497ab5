# -*- coding: utf-8 -*-
import os
from setuptools import setup, find_packages


here = os.path.abspath(os.path.dirname(__file__))


def _filter_requirement(req):
    req = req.strip()
    # skip comments and dash options (e.g. `-e` & `-r`)
    return bool(req and req[0] not in '#-')


def read_from_requirements_txt(filepath):
    f = os.path.join(here, filepath)
    with open(f) as fb:
        return tuple([
            x.strip()
            for x in fb
            if _filter_requirement(x)
        ])


def read_version():
    with open(os.path.join(here, 'votodometry', '__init__.py')) as fb:
        for line in fb:
            if line.startswith('__version__'):
                return line.split('=')[1].strip().strip("'\"")
    raise RuntimeError('no __version__ in votodometry/__init__.py')


install_requires = read_from_requirements_txt('requirements/main.txt')
tests_require = read_from_requirements_txt('requirements/test.txt')
extras_require = {
    'test': tests_require,
}

description = """\
Visual odometry with a frozen image encoder and a time-space attention
decoder, trained and evaluated on synthetic desk-scale sequences."""


setup(
    name='vot-odometry',
    version=read_version(),
    author='vot-odometry contributors',
    license='AGPLv3, See also LICENCE.txt',
    description=description,
    install_requires=install_requires,
    tests_require=tests_require,
    extras_require=extras_require,
    test_suite='votodometry.tests',
    packages=find_packages(),
    include_package_data=True,
    package_data={
        'votodometry.tests': ['data/*.*', 'testing.toml'],
    },
    python_requires='>=3.8',
    entry_points="""\
    [console_scripts]
    vot = votodometry.scripts.vot:main
    """,
)
