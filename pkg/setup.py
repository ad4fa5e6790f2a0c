import re
from setuptools import setup


with open('loewner/__init__.py') as f:
    source = f.read()

try:
    version = re.search(r'^__version__\s*=\s*[\'"]([^\'"]*)[\'"]', source, re.M).group(1)
except AttributeError:
    raise RuntimeError('Could not identify version') from None

try:
    author = re.search(r'^__author__\s*=\s*[\'"]([^\'"]*)[\'"]', source, re.M).group(1)
except AttributeError:
    author = 'loewner-lab'


with open('README.md', encoding='utf-8') as f:
    readme = f.read()


setup(
    name='loewner.py',
    author=author,
    version=version,
    packages=[
        'loewner'
    ],
    license='MIT',
    description='Numerical Loewner chains, evolution families and spirallike maps on the disc and the ball.',
    long_description=readme,
    long_description_content_type="text/markdown",
    include_package_data=True,
    install_requires=[
        'numpy>=1.21',
        'scipy>=1.8',
    ],
    extras_require={
        'docs': [
            'sphinx>=4.0.2',
            'karma_sphinx_theme>=0.0.8',
        ],
        'test': [
            'pytest>=7.0',
            'hypothesis>=6.0',
        ],
    },
    entry_points={
        'console_scripts': [
            'loewner=loewner.cli:main',
        ],
    },
    python_requires='>=3.8.0',
    classifiers=[
        'License :: OSI Approved :: MIT License',
        'Intended Audience :: Science/Research',
        'Natural Language :: English',
        'Operating System :: OS Independent',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Topic :: Scientific/Engineering :: Mathematics',
        'Topic :: Software Development :: Libraries :: Python Modules',
    ]
)
