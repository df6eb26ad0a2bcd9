from setuptools import setup, find_packages

setup(
    name='mmlio',
    version='0.3.0',
    packages=find_packages(exclude=['tests', 'tests.*']),
    py_modules=['config'],
    install_requires=[
        'numpy',
        'scipy',
        'click',
        'python-dotenv',
        'pydantic',
        'rich',
        'tqdm',
    ],
    entry_points={
        'console_scripts': ['mmlio=mmlio.cli:cli'],
    },
    license="MIT",
)
