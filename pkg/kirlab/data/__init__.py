from kirlab.data.fixtures import *
