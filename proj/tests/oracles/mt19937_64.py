# Reference MT19937-64 used to derive the filler-stream golden words in test_stego_codec.cpp.
# Sanity: the 10000th output for the default seed 5489 must be 9981545732273789042.
M=(1<<64)-1
def mt(seed):
    n,m=312,156; mt=[0]*n; mt[0]=seed&M
    for i in range(1,n): mt[i]=(6364136223846793005*(mt[i-1]^(mt[i-1]>>62))+i)&M
    idx=n
    while True:
        if idx>=n:
            for i in range(n):
                x=(mt[i]&0xFFFFFFFF80000000)|(mt[(i+1)%n]&0x7FFFFFFF)
                xa=x>>1
                if x&1: xa^=0xB5026F5AA96619E9
                mt[i]=mt[(i+m)%n]^xa
            idx=0
        y=mt[idx]; idx+=1
        y^=(y>>29)&0x5555555555555555; y^=(y<<17)&0x71D67FFFEDA60000
        y^=(y<<37)&0xFFF7EEE000000000; y^=y>>43
        yield y&M
g=mt(5489)
for i in range(9999): next(g)
print("10000th default:",next(g))
g=mt(42); print([hex(next(g)) for _ in range(3)])
