#!/usr/bin/env python
import os
from setuptools import setup, find_packages


def _read(fname):
    try:
        return open(os.path.join(os.path.dirname(__file__), fname)).read()
    except IOError:
        return ''


REQUIREMENTS = [l for l in _read('requirements.txt').split('\n') if l and not l.startswith('#')]
VERSION = '0.1.0'

setup(
        name='orrs-tools',
        version=VERSION,
        description='Predict I/M emissions from on-road remote sensing and screen vehicles for inspection.',
        long_description=_read("README.md"),
        license='MIT',
        platforms='any',
        packages=find_packages(include=["orrs_tools", "orrs_tools.*"]),
        scripts=["run_orrs_pipeline.py"],
        python_requires='>=3.8',
        install_requires=REQUIREMENTS,
        tests_require=REQUIREMENTS + ["tox", "pytest", "coverage"],
        classifiers=[
            'Development Status :: 3 - Alpha',
            'License :: OSI Approved :: MIT License',
            'Operating System :: OS Independent',
            'Intended Audience :: Science/Research',
            'Topic :: Scientific/Engineering',
            'Topic :: Scientific/Engineering :: Atmospheric Science',
            'Programming Language :: Python',
            'Programming Language :: Python :: 3.8',
            'Programming Language :: Python :: 3.9',
            'Programming Language :: Python :: 3.10',
            'Programming Language :: Python :: 3.11',
            'Topic :: Software Development :: Libraries :: Python Modules'
        ]
)
